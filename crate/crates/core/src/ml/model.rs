//! Trained models, voting and the ANTM container.
//!
//! ```text
//! "ANTM" | version u8 | header_len u32 | header JSON
//! tensor_count u32 | (rows u32 | cols u32 | f64 * rows*cols) * tensor_count
//! crc32 u32           (of the tensor section)
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::mlp::{Dense, Mlp};
use super::standardize::Standardizer;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"ANTM";
const MODEL_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Ridge { alpha: f64 },
    Lasso { alpha: f64, tol: f64, max_iter: usize, converged: bool, iterations: usize },
    Mlp { hidden: Vec<usize>, epochs: usize, batch_size: usize, learning_rate: f64, seed: u64, final_loss: f64 },
    Voting { members: Vec<ModelKind> },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Ridge { .. } => "ridge",
            ModelKind::Lasso { .. } => "lasso",
            ModelKind::Mlp { .. } => "mlp",
            ModelKind::Voting { .. } => "voting",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Net {
    /// `y = z W + b` on standardized features `z`.
    Affine {
        w: Array2<f64>,
        b: Array1<f64>,
    },
    Mlp(Mlp),
    Voting(Vec<TrainedModel>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub target_names: Vec<String>,
    pub standardizer: Standardizer,
    pub net: Net,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: ModelKind,
    features: usize,
    outputs: usize,
    target_names: Vec<String>,
}

impl TrainedModel {
    pub fn new(kind: ModelKind, standardizer: Standardizer, net: Net) -> Self {
        TrainedModel { kind, target_names: Vec::new(), standardizer, net }
    }

    pub fn with_targets(mut self, names: &[String]) -> Self {
        self.target_names = names.to_vec();
        if let Net::Voting(ms) = &mut self.net {
            for m in ms {
                m.target_names = names.to_vec();
            }
        }
        self
    }

    /// Average of `members`, which must agree on input and output sizes.
    pub fn voting(members: Vec<TrainedModel>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::Config("voting needs at least one member".into()))?;
        let (f, p) = (first.features(), first.outputs());
        if members.iter().any(|m| m.features() != f || m.outputs() != p) {
            return Err(Error::Dimension("voting members disagree on input or output size".into()));
        }
        let kind = ModelKind::Voting { members: members.iter().map(|m| m.kind.clone()).collect() };
        let names = first.target_names.clone();
        Ok(TrainedModel {
            kind,
            target_names: names,
            standardizer: Standardizer::identity(f),
            net: Net::Voting(members),
        })
    }

    pub fn features(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn outputs(&self) -> usize {
        match &self.net {
            Net::Affine { b, .. } => b.len(),
            Net::Mlp(m) => m.layers.last().map_or(0, |l| l.b.len()),
            Net::Voting(ms) => ms[0].outputs(),
        }
    }

    /// Predict one row per input row from raw S11 features.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        match &self.net {
            Net::Voting(ms) => predict_voting(ms, x),
            Net::Affine { w, b } => Ok(self.standardizer.transform(x)?.dot(w) + b),
            Net::Mlp(m) => Ok(m.forward(&self.standardizer.transform(x)?)),
        }
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Array2::from_shape_vec((1, x.len()), x.to_vec()).map_err(|e| Error::Dimension(e.to_string()))?;
        Ok(self.predict(&m)?.row(0).to_vec())
    }

    fn tensors(&self, out: &mut Vec<Array2<f64>>) {
        let row = |v: &[f64]| Array2::from_shape_vec((1, v.len()), v.to_vec()).unwrap();
        out.push(row(&self.standardizer.mean));
        out.push(row(&self.standardizer.std));
        match &self.net {
            Net::Affine { w, b } => {
                out.push(w.clone());
                out.push(b.clone().insert_axis(Axis(0)));
            }
            Net::Mlp(m) => {
                for l in &m.layers {
                    out.push(l.w.clone());
                    out.push(l.b.clone().insert_axis(Axis(0)));
                }
            }
            Net::Voting(ms) => ms.iter().for_each(|m| m.tensors(out)),
        }
    }

    fn from_tensors(
        kind: &ModelKind,
        f: usize,
        p: usize,
        names: &[String],
        it: &mut impl Iterator<Item = Array2<f64>>,
    ) -> Result<Self> {
        let mut take = |rows: usize, cols: usize| -> Result<Array2<f64>> {
            let t = it.next().ok_or_else(|| Error::Corrupt("model file has too few tensors".into()))?;
            if t.dim() != (rows, cols) {
                return Err(Error::Corrupt(format!("tensor shape {:?}, expected ({rows}, {cols})", t.dim())));
            }
            Ok(t)
        };
        let standardizer = Standardizer {
            mean: take(1, f)?.into_raw_vec_and_offset().0,
            std: take(1, f)?.into_raw_vec_and_offset().0,
        };
        let net = match kind {
            ModelKind::Linear | ModelKind::Ridge { .. } | ModelKind::Lasso { .. } => {
                let w = take(f, p)?;
                let b = take(1, p)?.row(0).to_owned();
                Net::Affine { w, b }
            }
            ModelKind::Mlp { hidden, .. } => {
                let mut widths = vec![f];
                widths.extend(hidden);
                widths.push(p);
                let mut layers = Vec::new();
                for w in widths.windows(2) {
                    let wt = take(w[0], w[1])?;
                    let b = take(1, w[1])?.row(0).to_owned();
                    layers.push(Dense { w: wt, b });
                }
                Net::Mlp(Mlp { layers })
            }
            ModelKind::Voting { members } => {
                Net::Voting(members.iter().map(|k| Self::from_tensors(k, f, p, names, it)).collect::<Result<_>>()?)
            }
        };
        Ok(TrainedModel { kind: kind.clone(), target_names: names.to_vec(), standardizer, net })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            kind: self.kind.clone(),
            features: self.features(),
            outputs: self.outputs(),
            target_names: self.target_names.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut ts = Vec::new();
        self.tensors(&mut ts);
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.push(MODEL_VERSION);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        let start = out.len();
        out.extend_from_slice(&(ts.len() as u32).to_le_bytes());
        for t in &ts {
            out.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
            out.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
            for v in t.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::Corrupt(m.to_string());
        if b.len() < 13 || &b[..4] != MODEL_MAGIC {
            return Err(corrupt("missing ANTM magic"));
        }
        if b[4] != MODEL_VERSION {
            return Err(Error::Corrupt(format!("unsupported model version {}", b[4])));
        }
        let hlen = u32::from_le_bytes(b[5..9].try_into().unwrap()) as usize;
        let hend = 9 + hlen;
        if b.len() < hend + 8 {
            return Err(corrupt("model file truncated"));
        }
        let header: Header =
            serde_json::from_slice(&b[9..hend]).map_err(|e| Error::Corrupt(format!("unreadable model header: {e}")))?;
        let body = &b[hend..b.len() - 4];
        let crc = u32::from_le_bytes(b[b.len() - 4..].try_into().unwrap());
        if crc32fast::hash(body) != crc {
            return Err(corrupt("model CRC mismatch"));
        }
        let mut pos = 0;
        let u32_at = |pos: &mut usize| -> Result<usize> {
            let v = body.get(*pos..*pos + 4).ok_or_else(|| corrupt("model file truncated"))?;
            *pos += 4;
            Ok(u32::from_le_bytes(v.try_into().unwrap()) as usize)
        };
        let count = u32_at(&mut pos)?;
        let mut ts = Vec::with_capacity(count);
        for _ in 0..count {
            let r = u32_at(&mut pos)?;
            let c = u32_at(&mut pos)?;
            let bytes = body.get(pos..pos + 8 * r * c).ok_or_else(|| corrupt("model file truncated"))?;
            pos += 8 * r * c;
            let v: Vec<f64> = bytes.chunks_exact(8).map(|x| f64::from_le_bytes(x.try_into().unwrap())).collect();
            ts.push(Array2::from_shape_vec((r, c), v).unwrap());
        }
        if pos != body.len() {
            return Err(corrupt("trailing bytes in model file"));
        }
        let mut it = ts.into_iter();
        let m = Self::from_tensors(&header.kind, header.features, header.outputs, &header.target_names, &mut it)?;
        if it.next().is_some() {
            return Err(corrupt("model file has extra tensors"));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Elementwise mean of member predictions.
pub fn predict_voting(members: &[TrainedModel], x: &Array2<f64>) -> Result<Array2<f64>> {
    let first = members.first().ok_or_else(|| Error::Config("voting needs at least one member".into()))?;
    let mut sum = first.predict(x)?;
    for m in &members[1..] {
        let p = m.predict(x)?;
        if p.dim() != sum.dim() {
            return Err(Error::Dimension("voting members disagree on output size".into()));
        }
        sum += &p;
    }
    Ok(sum / members.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{fit_lasso, fit_linear, fit_mlp, fit_ridge, MlpConfig};
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant(f: usize, vals: &[f64]) -> TrainedModel {
        let b = Array1::from(vals.to_vec());
        TrainedModel::new(
            ModelKind::Linear,
            Standardizer::identity(f),
            Net::Affine { w: Array2::zeros((f, vals.len())), b },
        )
    }

    fn data() -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((40, 6), |_| rng.random_range(-30.0..0.0));
        let y = Array2::from_shape_fn((40, 2), |(i, j)| x[[i, j]] * 0.3 + f64::sin(x[[i, 5]]) + 20.0);
        (x, y)
    }

    #[test]
    fn voting_examples() {
        let x = Array2::zeros((1, 3));
        let two = predict_voting(&[constant(3, &[2.0]), constant(3, &[4.0])], &x).unwrap();
        assert_eq!(two[[0, 0]], 3.0);
        let three = predict_voting(&[constant(3, &[1.0]), constant(3, &[2.0]), constant(3, &[6.0])], &x).unwrap();
        assert_eq!(three[[0, 0]], 3.0);
        let same = predict_voting(&[constant(3, &[1.25, 7.0]), constant(3, &[1.25, 7.0])], &x).unwrap();
        assert_eq!(same.row(0).to_vec(), vec![1.25, 7.0]);
    }

    #[test]
    fn voting_rejects_mismatch() {
        assert!(TrainedModel::voting(vec![constant(3, &[1.0]), constant(3, &[1.0, 2.0])]).is_err());
        assert!(TrainedModel::voting(vec![constant(3, &[1.0]), constant(4, &[1.0])]).is_err());
        assert!(TrainedModel::voting(vec![]).is_err());
    }

    #[test]
    fn every_kind_round_trips() {
        let (x, y) = data();
        let names = vec!["a".to_string(), "b".to_string()];
        let cfg = MlpConfig { hidden: vec![8, 8], epochs: 5, batch_size: 10, ..Default::default() };
        let lin = fit_linear(&x, &y).unwrap();
        let ridge = fit_ridge(&x, &y, 0.5).unwrap();
        let lasso = fit_lasso(&x, &y, 0.01, 1e-8, 1000).unwrap();
        let mlp = fit_mlp(&x, &y, &cfg).unwrap().0;
        let vote = TrainedModel::voting(vec![lin.clone(), ridge.clone(), mlp.clone()]).unwrap();
        for m in [lin, ridge, lasso, mlp, vote] {
            let m = m.with_targets(&names);
            let back = TrainedModel::from_bytes(&m.to_bytes().unwrap()).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
        }
    }

    #[test]
    fn corrupt_model_rejected() {
        let (x, y) = data();
        let bytes = fit_ridge(&x, &y, 1.0).unwrap().to_bytes().unwrap();
        assert!(TrainedModel::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut flipped = bytes.clone();
        let n = flipped.len();
        flipped[n - 20] ^= 0x40;
        assert!(matches!(TrainedModel::from_bytes(&flipped), Err(Error::Corrupt(_))));
    }

    #[test]
    fn wrong_width_input_rejected() {
        let (x, y) = data();
        let m = fit_ridge(&x, &y, 1.0).unwrap();
        assert!(m.predict(&Array2::zeros((2, 5))).is_err());
        assert_eq!(m.predict_one(&[0.0; 6]).unwrap().len(), 2);
        let _ = array![[0.0]];
    }

    proptest! {
        #[test]
        fn voting_within_member_range(a in prop::collection::vec(-50.0f64..50.0, 3), b in prop::collection::vec(-50.0f64..50.0, 3), c in prop::collection::vec(-50.0f64..50.0, 3)) {
            let ms = vec![constant(2, &a), constant(2, &b), constant(2, &c)];
            let v = predict_voting(&ms, &Array2::zeros((1, 2))).unwrap();
            for k in 0..3 {
                let lo = a[k].min(b[k]).min(c[k]);
                let hi = a[k].max(b[k]).max(c[k]);
                prop_assert!(v[[0, k]] >= lo - 1e-12 && v[[0, k]] <= hi + 1e-12);
            }
        }
    }
}
