use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{NdaeModel, TermList};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// On-disk JSON form of an [`NdaeModel`]. Matrices are row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub n_d: usize,
    pub n_a: usize,
    pub m: usize,
    pub w0: f64,
    pub h: Vec<f64>,
    pub a_d: Matrix,
    pub c_d: Matrix,
    pub b: Matrix,
    pub a_a: Matrix,
    pub c_a: Matrix,
    pub f: TermList,
    pub g: TermList,
}

impl ModelDocument {
    pub fn from_model(model: &NdaeModel) -> Result<Self> {
        let terms = |name: &str, tl: Option<&TermList>| {
            tl.cloned().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "nonlinearity {name} is not a term list and cannot be serialized"
                ))
            })
        };
        Ok(Self {
            n_d: model.n_d,
            n_a: model.n_a,
            m: model.m,
            w0: model.w0,
            h: model.h.clone(),
            a_d: model.a_d.clone(),
            c_d: model.c_d.clone(),
            b: model.b.clone(),
            a_a: model.a_a.clone(),
            c_a: model.c_a.clone(),
            f: terms("f", model.f.as_terms())?,
            g: terms("g", model.g.as_terms())?,
        })
    }

    pub fn into_model(self) -> Result<NdaeModel> {
        let model = NdaeModel::new(
            self.a_d,
            self.c_d,
            self.b,
            self.a_a,
            self.c_a,
            self.h,
            self.w0,
            Arc::new(self.f),
            Arc::new(self.g),
        )?;
        if (model.n_d, model.n_a, model.m) != (self.n_d, self.n_a, self.m) {
            return Err(Error::dims("declared dimensions disagree with matrices"));
        }
        Ok(model)
    }
}

impl NdaeModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument::from_model(self)?)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ModelDocument>(text)?.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_synthetic_model, FnMap};

    #[test]
    fn round_trip_is_bit_exact() {
        let model = build_synthetic_model(2, 99).unwrap();
        let text = model.to_json().unwrap();
        let back = NdaeModel::from_json(&text).unwrap();
        let a = ModelDocument::from_model(&model).unwrap();
        let b = ModelDocument::from_model(&back).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.a_a.as_slice().iter().zip(b.a_a.as_slice()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(text, back.to_json().unwrap());
    }

    #[test]
    fn closure_models_are_not_serializable() {
        let m = NdaeModel::new(
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 0),
            Matrix::zeros(1, 1),
            Matrix::identity(1),
            Matrix::identity(1),
            vec![0.0],
            0.0,
            Arc::new(TermList::new(0, vec![])),
            Arc::new(FnMap::new(1, |xd, _| vec![xd[0]])),
        )
        .unwrap();
        assert!(m.to_json().is_err());
    }

    #[test]
    fn rejects_inconsistent_document() {
        let model = build_synthetic_model(1, 1).unwrap();
        let mut doc = ModelDocument::from_model(&model).unwrap();
        doc.n_a += 1;
        assert!(doc.into_model().is_err());
    }
}
