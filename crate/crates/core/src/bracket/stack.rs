use crate::color::{DisplayImage, ExposureValue};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StackEntry {
    pub image: DisplayImage,
    pub ev: ExposureValue,
}

/// Display images at evenly spaced exposures around the reference `I_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureStack {
    entries: Vec<StackEntry>,
    reference: usize,
    step: f64,
}

impl ExposureStack {
    /// Validates ordering, spacing, the single `ev = 0` reference entry, and
    /// shared dimensions and transfer tag.
    pub fn new(mut entries: Vec<StackEntry>, step: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("exposure stack is empty"));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!("stack step must be > 0, got {step}")));
        }
        entries.sort_by(|a, b| a.ev.0.total_cmp(&b.ev.0));
        let dims = entries[0].image.dims();
        let transfer = entries[0].image.transfer();
        for e in &entries {
            if !e.ev.is_multiple_of(step) {
                return Err(Error::invalid(format!(
                    "ev {} is not a multiple of the step {step}",
                    e.ev.0
                )));
            }
            if e.image.dims() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: e.image.dims(),
                });
            }
            if e.image.transfer() != transfer {
                return Err(Error::invalid("stack entries use different transfer tags"));
            }
        }
        for w in entries.windows(2) {
            if ((w[1].ev.0 - w[0].ev.0) - step).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "stack evs {} and {} are not one step apart",
                    w[0].ev.0, w[1].ev.0
                )));
            }
        }
        let zeros: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.ev.0.abs() < 1e-9)
            .map(|(i, _)| i)
            .collect();
        if zeros.len() != 1 {
            return Err(Error::invalid("stack needs exactly one entry at ev 0"));
        }
        Ok(Self {
            entries,
            reference: zeros[0],
            step,
        })
    }

    pub fn single(i0: DisplayImage, step: f64) -> Self {
        Self {
            entries: vec![StackEntry {
                image: i0,
                ev: ExposureValue::ZERO,
            }],
            reference: 0,
            step,
        }
    }

    pub fn entries(&self) -> &[StackEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<StackEntry> {
        self.entries
    }

    pub fn reference_index(&self) -> usize {
        self.reference
    }

    pub fn reference(&self) -> &StackEntry {
        &self.entries[self.reference]
    }

    pub fn darkest(&self) -> &StackEntry {
        &self.entries[0]
    }

    pub fn brightest(&self) -> &StackEntry {
        self.entries.last().expect("stack is never empty")
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn evs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ev.0).collect()
    }

    pub(crate) fn push_darker(&mut self, image: DisplayImage) {
        let ev = self.darkest().ev - self.step;
        self.entries.insert(0, StackEntry { image, ev });
        self.reference += 1;
    }

    pub(crate) fn push_brighter(&mut self, image: DisplayImage) {
        let ev = self.brightest().ev + self.step;
        self.entries.push(StackEntry { image, ev });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::Transfer;

    fn entry(ev: f64) -> StackEntry {
        StackEntry {
            image: DisplayImage::filled(2, 2, [0.5; 3], Transfer::Gamma22),
            ev: ExposureValue(ev),
        }
    }

    #[test]
    fn validates_layout() {
        let s = ExposureStack::new(vec![entry(2.0), entry(-2.0), entry(0.0)], 2.0).unwrap();
        assert_eq!(s.evs(), vec![-2.0, 0.0, 2.0]);
        assert_eq!(s.reference_index(), 1);
        assert!(ExposureStack::new(vec![entry(-2.0), entry(2.0)], 2.0).is_err());
        assert!(ExposureStack::new(vec![entry(0.0), entry(4.0)], 2.0).is_err());
        assert!(ExposureStack::new(vec![entry(0.0), entry(1.0)], 2.0).is_err());
        assert!(ExposureStack::new(vec![], 2.0).is_err());
        let mut odd = entry(2.0);
        odd.image = DisplayImage::filled(3, 2, [0.5; 3], Transfer::Gamma22);
        assert!(ExposureStack::new(vec![entry(0.0), odd], 2.0).is_err());
    }

    #[test]
    fn pushes_keep_reference() {
        let mut s = ExposureStack::single(entry(0.0).image, 2.0);
        s.push_darker(entry(0.0).image);
        s.push_brighter(entry(0.0).image);
        s.push_darker(entry(0.0).image);
        assert_eq!(s.evs(), vec![-4.0, -2.0, 0.0, 2.0]);
        assert_eq!(s.reference().ev, ExposureValue(0.0));
    }
}
