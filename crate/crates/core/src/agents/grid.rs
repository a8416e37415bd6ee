/// The discrete action grid: 51 equally spaced positions spanning [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ActionGrid {
    values: Vec<f64>,
}

impl ActionGrid {
    pub fn standard() -> Self {
        ActionGrid {
            values: (0..=50).map(|i| i as f64 / 50.0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = ActionGrid::standard();
        assert_eq!(g.len(), 51);
        assert_eq!(g.value(0), 0.0);
        assert_eq!(g.value(50), 1.0);
        assert_eq!(g.value(1), 0.02);
        for w in g.values().windows(2) {
            assert!((w[1] - w[0] - 0.02).abs() < 1e-15);
        }
    }
}
