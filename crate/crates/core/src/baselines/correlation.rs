use std::collections::BTreeMap;
use std::path::Path;

use super::BaselineError;

fn check(x: &[f64], y: &[f64]) -> Result<usize, BaselineError> {
    if x.len() != y.len() {
        return Err(BaselineError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(BaselineError::TooShort(x.len()));
    }
    Ok(x.len())
}

fn pair_counts(x: &[f64], y: &[f64]) -> (i64, i64, i64, i64) {
    // (concordant, discordant, tied in x only, tied in y only)
    let (mut c, mut d, mut tx, mut ty) = (0, 0, 0, 0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let sx = (x[i] - x[j])
                .partial_cmp(&0.0)
                .unwrap_or(std::cmp::Ordering::Equal) as i64;
            let sy = (y[i] - y[j])
                .partial_cmp(&0.0)
                .unwrap_or(std::cmp::Ordering::Equal) as i64;
            match (sx, sy) {
                (0, 0) => {}
                (0, _) => tx += 1,
                (_, 0) => ty += 1,
                _ if sx == sy => c += 1,
                _ => d += 1,
            }
        }
    }
    (c, d, tx, ty)
}

/// Kendall's tau-a: (concordant − discordant) / C(n, 2). Tied pairs count
/// as neither.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64, BaselineError> {
    let n = check(x, y)? as i64;
    let (c, d, _, _) = pair_counts(x, y);
    Ok((c - d) as f64 / (n * (n - 1) / 2) as f64)
}

/// Kendall's tau-b, which corrects the denominator for ties.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, BaselineError> {
    let n = check(x, y)? as i64;
    let (c, d, _, _) = pair_counts(x, y);
    let n0 = n * (n - 1) / 2;
    let ties = |v: &[f64]| {
        let mut sorted = v.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut t = 0i64;
        let mut run = 1i64;
        for k in 1..=sorted.len() {
            if k < sorted.len() && sorted[k] == sorted[k - 1] {
                run += 1;
            } else {
                t += run * (run - 1) / 2;
                run = 1;
            }
        }
        t
    };
    let (n1, n2) = (ties(x), ties(y));
    if n1 == n0 {
        return Err(BaselineError::ZeroVariance("x"));
    }
    if n2 == n0 {
        return Err(BaselineError::ZeroVariance("y"));
    }
    Ok((c - d) as f64 / (((n0 - n1) * (n0 - n2)) as f64).sqrt())
}

/// Sample Pearson correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, BaselineError> {
    let n = check(x, y)? as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(BaselineError::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(BaselineError::ZeroVariance("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Parse `id,value` rows (comma, tab or space separated). A first row whose
/// value does not parse is taken as a header.
pub fn parse_values(text: &str) -> Result<BTreeMap<String, f64>, BaselineError> {
    let delimiter = if text.contains(',') {
        b','
    } else if text.contains('\t') {
        b'\t'
    } else {
        b' '
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| BaselineError::Parse(e.to_string()))?;
        let fields: Vec<&str> = record.iter().filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 {
            return Err(BaselineError::Parse(format!(
                "row {}: expected 2 columns, got {}",
                line + 1,
                fields.len()
            )));
        }
        match fields[1].parse::<f64>() {
            Ok(v) => {
                if out.insert(fields[0].to_string(), v).is_some() {
                    return Err(BaselineError::Parse(format!("duplicate id {}", fields[0])));
                }
            }
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(BaselineError::Parse(format!("row {}: {e}", line + 1)));
            }
        }
    }
    Ok(out)
}

pub fn read_values(path: &Path) -> Result<BTreeMap<String, f64>, BaselineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BaselineError::Parse(format!("{}: {e}", path.display())))?;
    parse_values(&text)
}

/// Pair values by id; both files must list exactly the same ids.
pub fn align(
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
) -> Result<(Vec<f64>, Vec<f64>), BaselineError> {
    if let Some(id) = a.keys().find(|k| !b.contains_key(*k)) {
        return Err(BaselineError::Misaligned(format!(
            "id {id} missing from second file"
        )));
    }
    if let Some(id) = b.keys().find(|k| !a.contains_key(*k)) {
        return Err(BaselineError::Misaligned(format!(
            "id {id} missing from first file"
        )));
    }
    Ok(a.iter().map(|(k, v)| (*v, b[k])).unzip())
}
