//! Every example runs to completion.

#[path = "../examples/baselines.rs"]
mod baselines;
#[path = "../examples/correlation.rs"]
mod correlation;
#[path = "../examples/cost_table.rs"]
mod cost_table;
#[path = "../examples/external_evaluator.rs"]
mod external_evaluator;
#[path = "../examples/proxy_search.rs"]
mod proxy_search;
#[path = "../examples/sample_and_validate.rs"]
mod sample_and_validate;

#[test]
fn sample_and_validate_runs() {
    sample_and_validate::run();
}

#[test]
fn cost_table_runs() {
    cost_table::run();
}

#[test]
fn proxy_search_runs() {
    proxy_search::run();
}

#[test]
fn external_evaluator_runs() {
    external_evaluator::run();
}

#[test]
fn baselines_runs() {
    baselines::run();
}

#[test]
fn correlation_runs() {
    correlation::run();
}
