//! Output files: front export (JSON), scatter data (CSV) and run manifests.
//! Everything is written atomically through a temp file in the target
//! directory.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::evaluator::{ObjectivePair, ObjectiveVector};
use crate::nsga2::{FrontArchive, GenerationSnapshot, SearchStats};
use crate::search_space::Genome;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportCandidate {
    pub id: u64,
    pub generation: usize,
    pub rank: usize,
    /// `null` for boundary members (infinite distance).
    pub crowding: Option<f64>,
    pub on_front: bool,
    pub encoding: String,
    pub genome: Genome,
    pub objectives: ObjectiveVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportRun {
    pub label: String,
    pub branches: Option<u8>,
    pub objectives: ObjectivePair,
    pub complete: bool,
    pub stats: SearchStats,
    pub front: Vec<u64>,
    pub top_k: Vec<u64>,
    pub candidates: Vec<ExportCandidate>,
    pub history: Vec<GenerationSnapshot>,
}

impl ExportRun {
    pub fn from_archive(
        label: impl Into<String>,
        branches: Option<u8>,
        archive: &FrontArchive,
    ) -> Self {
        let candidates = archive
            .candidates
            .iter()
            .map(|c| ExportCandidate {
                id: c.id,
                generation: c.generation,
                rank: c.rank,
                crowding: c.crowding.is_finite().then_some(c.crowding),
                on_front: archive.front.contains(&c.id),
                encoding: c.encoding.clone(),
                genome: c.genome.clone(),
                objectives: c.objectives.clone(),
            })
            .collect();
        ExportRun {
            label: label.into(),
            branches,
            objectives: archive.objectives,
            complete: archive.complete,
            stats: archive.stats.clone(),
            front: archive.front.clone(),
            top_k: archive.top_k.clone(),
            candidates,
            history: archive.history.clone(),
        }
    }

    pub fn front_candidates(&self) -> impl Iterator<Item = &ExportCandidate> {
        self.candidates.iter().filter(|c| c.on_front)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontExport {
    pub runs: Vec<ExportRun>,
}

impl FrontExport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("export serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// One row per candidate; the generation column drives light-to-dark
    /// coloring when plotted.
    pub fn scatter_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "run",
            "id",
            "generation",
            "score",
            "latency_ms",
            "flops_g",
            "params_m",
            "peak_mem_mb",
            "feasible",
            "rank",
            "on_front",
        ])
        .expect("in-memory write");
        for run in &self.runs {
            for c in &run.candidates {
                let o = &c.objectives;
                w.write_record([
                    run.label.clone(),
                    c.id.to_string(),
                    c.generation.to_string(),
                    o.score.to_string(),
                    o.latency_ms.to_string(),
                    o.flops_g.to_string(),
                    o.params_m.to_string(),
                    o.peak_mem_mb.to_string(),
                    o.feasible.to_string(),
                    c.rank.to_string(),
                    c.on_front.to_string(),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }
}

/// Everything needed to rerun a command, plus what happened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// e.g. `search`, `baseline random`, `baseline local`.
    pub command: String,
    pub engine_version: String,
    pub space_source: String,
    pub profile_source: String,
    pub space: crate::search_space::SearchSpaceConfig,
    pub profile: crate::cost_model::HardwareProfile,
    pub evaluator: String,
    /// Command-specific parameters.
    pub params: serde_json::Value,
    pub seed: u64,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub evaluations: usize,
    /// Latency-cap, score-floor and duplicate rejections, summed over runs.
    pub retries: usize,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Write `contents` to `path` via a sibling temp file and a rename, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost_model::HardwareProfile;
    use crate::evaluator::ProxyEvaluator;
    use crate::nsga2::{search, Nsga2Params};
    use crate::search_space::SearchSpaceConfig;

    fn small_run() -> FrontArchive {
        let config = SearchSpaceConfig::toy();
        let profile = HardwareProfile::unit();
        let params = Nsga2Params {
            population_size: 4,
            generations: 2,
            branches: Some(2),
            ..Nsga2Params::default()
        };
        search(
            &config,
            &profile,
            &params,
            &ProxyEvaluator::new(config.clone(), profile.clone()),
        )
        .unwrap()
    }

    #[test]
    fn export_round_trips_and_nulls_infinite_crowding() {
        let archive = small_run();
        let export = FrontExport {
            runs: vec![ExportRun::from_archive("b2", Some(2), &archive)],
        };
        let text = export.to_json();
        assert!(text.contains("\"crowding\": null"));
        assert_eq!(FrontExport::from_json(&text).unwrap(), export);
        assert_eq!(
            export.runs[0].front_candidates().count(),
            archive.front.len()
        );
    }

    #[test]
    fn scatter_has_a_row_per_candidate() {
        let archive = small_run();
        let export = FrontExport {
            runs: vec![ExportRun::from_archive("b2", Some(2), &archive)],
        };
        let csv = export.scatter_csv();
        assert_eq!(csv.lines().count(), 1 + archive.candidates.len());
        assert!(csv.starts_with("run,id,generation,score"));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
