//! JSON instance files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Instance, RevenueClass, RevenueFunction, Shape};
use crate::error::{Error, Result};

/// One `(kind, params, delta)` entry of an instance file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    #[serde(flatten)]
    pub shape: Shape,
    pub delta: f64,
}

/// On-disk form of an [`Instance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub id: String,
    pub class: RevenueClass,
    pub p_min: f64,
    pub p_max: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "N")]
    pub inventories: usize,
    #[serde(rename = "C")]
    pub capacities: Vec<f64>,
    #[serde(rename = "A")]
    pub allowances: Vec<f64>,
    pub slots: Vec<Vec<SlotSpec>>,
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        InstanceFile {
            id: inst.id().to_string(),
            class: inst.class(),
            p_min: inst.p_min(),
            p_max: inst.p_max(),
            horizon: inst.horizon(),
            inventories: inst.inventories(),
            capacities: inst.capacities().to_vec(),
            allowances: inst.allowances().to_vec(),
            slots: inst
                .slots()
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|g| SlotSpec {
                            shape: g.shape().clone(),
                            delta: g.clipped_from().unwrap_or(g.delta()),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Instance> {
        if f.slots.len() != f.horizon {
            return Err(Error::InvalidInstance(format!(
                "T = {} but {} slot rows",
                f.horizon,
                f.slots.len()
            )));
        }
        if f.capacities.len() != f.inventories {
            return Err(Error::InvalidInstance(format!(
                "N = {} but {} capacities",
                f.inventories,
                f.capacities.len()
            )));
        }
        let slots = f
            .slots
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|s| RevenueFunction::new(s.shape, s.delta))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Instance::new(
            f.id,
            f.class,
            f.p_min,
            f.p_max,
            f.capacities,
            f.allowances,
            slots,
        )
    }
}

impl Instance {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        let file: InstanceFile = serde_json::from_str(text)?;
        Instance::try_from(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Instance> {
        Instance::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Instance {
        let slots = vec![
            vec![
                RevenueFunction::linear(1.5, 0.5).unwrap(),
                RevenueFunction::piecewise_linear(vec![2.0, 1.0], vec![0.25], 0.75).unwrap(),
            ],
            vec![
                RevenueFunction::saturating(1.0, 2.0, 0.3, 1.0).unwrap(),
                RevenueFunction::linear(2.0, 0.0).unwrap(),
            ],
        ];
        Instance::new(
            "sample",
            RevenueClass::GradientBounded,
            1.0,
            2.0,
            vec![1.0, 2.0],
            vec![1.0, 1.0],
            slots,
        )
        .unwrap()
    }

    #[test]
    fn field_names() {
        let text = sample().to_json().unwrap();
        for key in [
            "\"T\"",
            "\"N\"",
            "\"C\"",
            "\"A\"",
            "\"slots\"",
            "\"kind\"",
            "\"params\"",
            "\"delta\"",
        ] {
            assert!(text.contains(key), "missing {key}");
        }
        assert!(text.contains("\"piecewise_linear\""));
    }

    #[test]
    fn round_trip() {
        let inst = sample();
        let back = Instance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn clipped_delta_round_trips() {
        let g = RevenueFunction::price_elastic(2.0, 1.0, 1.0, 1.7).unwrap();
        let inst = Instance::new(
            "pe",
            RevenueClass::PriceElastic,
            1.0,
            2.0,
            vec![1.0],
            vec![2.0],
            vec![vec![g]],
        )
        .unwrap();
        let back = Instance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(inst, back);
        assert_eq!(back.revenue(0, 0).clipped_from(), Some(1.7));
    }

    #[test]
    fn mismatched_dimensions() {
        let mut f = InstanceFile::from(&sample());
        f.horizon = 3;
        assert!(Instance::try_from(f).is_err());
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(
            slopes in proptest::collection::vec(1.0f64..3.0, 1..4),
            deltas in proptest::collection::vec(0.0f64..1.0, 1..4),
            cap in 0.01f64..10.0,
            pe in 1.0f64..3.0,
        ) {
            let n = slopes.len().min(deltas.len());
            let row: Vec<RevenueFunction> = (0..n)
                .map(|i| RevenueFunction::linear(slopes[i], deltas[i]).unwrap())
                .collect();
            let inst = Instance::new(
                "p", RevenueClass::GradientBounded, 1.0, 3.0,
                vec![cap; n], vec![1.0], vec![row],
            ).unwrap();
            let back = Instance::from_json(&inst.to_json().unwrap()).unwrap();
            prop_assert_eq!(&inst, &back);
            for i in 0..n {
                prop_assert_eq!(inst.revenue(i, 0).delta().to_bits(), back.revenue(i, 0).delta().to_bits());
            }
            let g = RevenueFunction::price_elastic(pe, 0.7, 1.3, 1.0).unwrap();
            let inst = Instance::new(
                "q", RevenueClass::PriceElastic, 1.0, 3.0,
                vec![cap], vec![1.0], vec![vec![g]],
            ).unwrap();
            prop_assert_eq!(&inst, &Instance::from_json(&inst.to_json().unwrap()).unwrap());
        }
    }
}
