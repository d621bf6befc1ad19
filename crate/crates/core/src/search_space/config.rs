use serde::{Deserialize, Serialize};

use super::SearchSpaceError;

/// Output strides of the three parallel rows, finest first.
pub const STRIDE_ROWS: [u32; 3] = [8, 16, 32];

/// Number of parallel resolution rows in the grid.
pub const NUM_ROWS: usize = 3;

/// The six aggregation heads, as row indices (0 = stride 8, 1 = stride 16, 2 = stride 32).
pub const HEADS: [&[usize]; 6] = [&[0], &[1], &[2], &[0, 1], &[0, 2], &[0, 1, 2]];

/// Shape of the searchable supernet.
///
/// Loaded from JSON with the keys `num_layers`, `stride_rows`, `width_multipliers`,
/// `base_channels` and `branch_priors`. The head options are fixed (see [`HEADS`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpaceConfig {
    pub num_layers: usize,
    #[serde(default = "default_stride_rows")]
    pub stride_rows: Vec<u32>,
    #[serde(default = "default_width_multipliers")]
    pub width_multipliers: Vec<u32>,
    #[serde(default = "default_base_channels")]
    pub base_channels: u32,
    #[serde(default = "default_branch_priors")]
    pub branch_priors: [f64; 3],
    /// Inner width of the self-attention bottleneck.
    #[serde(default = "default_attention_bottleneck")]
    pub attention_bottleneck: u32,
    /// Input image size `[height, width]` used for cost accounting.
    #[serde(default = "default_input_size")]
    pub input_size: [u32; 2],
}

fn default_stride_rows() -> Vec<u32> {
    STRIDE_ROWS.to_vec()
}

fn default_width_multipliers() -> Vec<u32> {
    vec![8, 12, 16]
}

fn default_base_channels() -> u32 {
    64
}

fn default_branch_priors() -> [f64; 3] {
    [0.2, 0.3, 0.5]
}

fn default_attention_bottleneck() -> u32 {
    48
}

fn default_input_size() -> [u32; 2] {
    [256, 512]
}

impl Default for SearchSpaceConfig {
    fn default() -> Self {
        Self::with_layers(12)
    }
}

impl SearchSpaceConfig {
    pub fn with_layers(num_layers: usize) -> Self {
        SearchSpaceConfig {
            num_layers,
            stride_rows: default_stride_rows(),
            width_multipliers: default_width_multipliers(),
            base_channels: default_base_channels(),
            branch_priors: default_branch_priors(),
            attention_bottleneck: default_attention_bottleneck(),
            input_size: default_input_size(),
        }
    }

    /// The small four-layer space used throughout the tests.
    pub fn toy() -> Self {
        Self::with_layers(4)
    }

    pub fn from_json(text: &str) -> Result<Self, SearchSpaceError> {
        let config: SearchSpaceConfig = serde_json::from_str(text)
            .map_err(|e| SearchSpaceError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SearchSpaceError> {
        let bad = |msg: String| Err(SearchSpaceError::InvalidConfig(msg));
        if self.num_layers < 2 {
            return bad(format!("num_layers must be >= 2, got {}", self.num_layers));
        }
        if self.stride_rows != STRIDE_ROWS {
            return bad(format!(
                "stride_rows must be {STRIDE_ROWS:?}, got {:?}",
                self.stride_rows
            ));
        }
        if self.width_multipliers.is_empty() || self.width_multipliers.contains(&0) {
            return bad("width_multipliers must be non-empty and positive".into());
        }
        if self.base_channels < 2 || self.base_channels % 2 != 0 {
            return bad(format!(
                "base_channels must be even and >= 2, got {}",
                self.base_channels
            ));
        }
        let [p1, p2, p3] = self.branch_priors;
        if self
            .branch_priors
            .iter()
            .any(|p| !p.is_finite() || *p < 0.0)
        {
            return bad("branch_priors must be finite and non-negative".into());
        }
        if ((p1 + p2 + p3) - 1.0).abs() > 1e-9 {
            return bad(format!("branch_priors must sum to 1, got {}", p1 + p2 + p3));
        }
        if !(p1 <= p2 && p2 <= p3) {
            return bad(format!(
                "branch_priors must favour more branches (p1 <= p2 <= p3), got {:?}",
                self.branch_priors
            ));
        }
        if p3 > 0.0 && self.num_layers < 3 {
            return bad("three-branch genomes need num_layers >= 3".into());
        }
        if self.attention_bottleneck == 0 {
            return bad("attention_bottleneck must be >= 1".into());
        }
        let [h, w] = self.input_size;
        if h == 0 || w == 0 || h % 64 != 0 || w % 64 != 0 {
            return bad(format!(
                "input_size must be positive multiples of 64, got {:?}",
                self.input_size
            ));
        }
        Ok(())
    }

    /// Channel count of a row for a given width multiplier: `multiplier * stride / 8`.
    pub fn row_width(&self, row: usize, width_index: usize) -> u32 {
        self.width_multipliers[width_index] * (STRIDE_ROWS[row] / STRIDE_ROWS[0])
    }

    /// Spatial size `(height, width)` of a feature map at `stride`.
    pub fn spatial(&self, stride: u32) -> (u32, u32) {
        (self.input_size[0] / stride, self.input_size[1] / stride)
    }

    /// Channel count every head row is projected to.
    pub fn head_channels(&self) -> u32 {
        self.base_channels
    }

    /// Whether a branch count can occur under the priors.
    pub fn branch_supported(&self, branch_count: u8) -> bool {
        (1..=3).contains(&branch_count) && self.branch_priors[branch_count as usize - 1] > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SearchSpaceConfig::default().validate().unwrap();
        SearchSpaceConfig::toy().validate().unwrap();
    }

    #[test]
    fn json_with_only_required_keys() {
        let c = SearchSpaceConfig::from_json(r#"{"num_layers": 4}"#).unwrap();
        assert_eq!(c, SearchSpaceConfig::toy());
    }

    #[test]
    fn rejects_bad_priors() {
        let mut c = SearchSpaceConfig::toy();
        c.branch_priors = [0.5, 0.3, 0.2];
        assert!(c.validate().is_err());
        c.branch_priors = [0.2, 0.3, 0.6];
        assert!(c.validate().is_err());
        c.branch_priors = [0.0, 0.0, 1.0];
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_wrong_strides() {
        let mut c = SearchSpaceConfig::toy();
        c.stride_rows = vec![8, 32, 16];
        assert!(c.validate().is_err());
    }

    #[test]
    fn widths_double_per_row() {
        let c = SearchSpaceConfig::toy();
        assert_eq!(c.row_width(0, 1), 12);
        assert_eq!(c.row_width(1, 1), 24);
        assert_eq!(c.row_width(2, 1), 48);
    }
}
