use crate::error::{Error, Result};

/// Equal-width histogram binning fit on a reference range of a variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Binning {
    edges: Vec<f64>,
}

impl Binning {
    /// Fits `bins` equal-width bins spanning `[min, max]` of `values`.
    pub fn fit(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Config("bin count must be positive".into()));
        }
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in values {
            if !v.is_finite() {
                return Err(Error::Data(format!("cannot bin non-finite value {v}")));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi <= lo {
            return Err(Error::ZeroWidthRange(lo));
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
        edges.push(hi);
        Ok(Self { edges })
    }

    pub fn bin_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Bin index of `v`; values outside the fitted range clamp to the edge bins.
    pub fn symbol(&self, v: f64) -> usize {
        let bins = self.bin_count();
        let lo = self.edges[0];
        let hi = self.edges[bins];
        let pos = (v - lo) / (hi - lo) * bins as f64;
        if pos.is_nan() || pos < 0.0 {
            0
        } else {
            (pos.floor() as usize).min(bins - 1)
        }
    }

    pub fn apply(&self, values: &[f64]) -> DiscretizedSeries {
        DiscretizedSeries {
            symbols: values.iter().map(|&v| self.symbol(v)).collect(),
            bin_count: self.bin_count(),
            bin_edges: self.edges.clone(),
        }
    }
}

/// Symbol sequence over the alphabet `0..bin_count`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedSeries {
    symbols: Vec<usize>,
    bin_count: usize,
    bin_edges: Vec<f64>,
}

impl DiscretizedSeries {
    /// Wraps already-discrete symbols; edges are the unit intervals `0, 1, .., B`.
    pub fn from_symbols(symbols: Vec<usize>, bin_count: usize) -> Result<Self> {
        if bin_count == 0 {
            return Err(Error::Config("bin count must be positive".into()));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s >= bin_count) {
            return Err(Error::Data(format!("symbol {s} outside alphabet of size {bin_count}")));
        }
        Ok(Self {
            symbols,
            bin_count,
            bin_edges: (0..=bin_count).map(|e| e as f64).collect(),
        })
    }

    /// Fits equal-width bins on `values` and discretizes them.
    pub fn fit(values: &[f64], bins: usize) -> Result<Self> {
        Ok(Binning::fit(values, bins)?.apply(values))
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_width_edges_cover_range() {
        let b = Binning::fit(&[0.0, 1.0, 4.0, 2.0], 4).unwrap();
        assert_eq!(b.edges(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(b.symbol(0.0), 0);
        assert_eq!(b.symbol(0.99), 0);
        assert_eq!(b.symbol(1.0), 1);
        assert_eq!(b.symbol(4.0), 3);
    }

    #[test]
    fn out_of_range_clamps() {
        let b = Binning::fit(&[0.0, 1.0], 2).unwrap();
        assert_eq!(b.symbol(-5.0), 0);
        assert_eq!(b.symbol(7.0), 1);
    }

    #[test]
    fn constant_series_is_zero_width() {
        assert!(matches!(Binning::fit(&[2.0; 5], 4), Err(Error::ZeroWidthRange(_))));
    }

    #[test]
    fn symbols_validated_against_alphabet() {
        assert!(DiscretizedSeries::from_symbols(vec![0, 1, 2], 2).is_err());
        let s = DiscretizedSeries::from_symbols(vec![0, 1, 1], 2).unwrap();
        assert_eq!(s.bin_edges(), &[0.0, 1.0, 2.0]);
    }
}
