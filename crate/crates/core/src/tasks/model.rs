use ndarray::Array2;
use rand::Rng;

use super::config::EncoderConfig;
use crate::baseline::BaselineEncoder;
use crate::interp::{EncodingPlan, GridEncoder};
use crate::nn::{MlpConfig, MlpModel};
use crate::{Error, Result, SphericalPoint};

#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Grid(GridEncoder<f32>),
    Baseline(BaselineEncoder),
}

impl Encoder {
    pub fn build<R: Rng + ?Sized>(config: &EncoderConfig, rng: &mut R) -> Result<Self> {
        if let Some(specs) = config.equirect_specs()? {
            let EncoderConfig::Equirect { feature_dim, .. } = *config else {
                unreachable!("equirect specs come from an equirect config")
            };
            return Ok(Encoder::Grid(GridEncoder::equirect(&specs, feature_dim, rng)?));
        }
        if let Some(specs) = config.healpix_specs()? {
            let EncoderConfig::Healpix { feature_dim, .. } = *config else {
                unreachable!("healpix specs come from a healpix config")
            };
            return Ok(Encoder::Grid(GridEncoder::healpix(&specs, feature_dim, rng)?));
        }
        let baseline = config.baseline().expect("non-grid encoders are baselines");
        Ok(Encoder::Baseline(BaselineEncoder::new(baseline)?))
    }

    /// Spatial feature width, excluding any time column.
    pub fn output_dim(&self) -> usize {
        match self {
            Encoder::Grid(g) => g.output_dim(),
            Encoder::Baseline(b) => b.output_dim(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Encoder::Grid(g) => g.param_count(),
            Encoder::Baseline(_) => 0,
        }
    }
}

/// Encoder plus MLP: the complete field representation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    pub encoder_config: EncoderConfig,
    pub encoder: Encoder,
    pub mlp: MlpModel<f32>,
    pub with_time: bool,
}

impl FieldModel {
    pub fn new<R: Rng + ?Sized>(
        encoder_config: &EncoderConfig,
        mlp_config: &MlpConfig,
        with_time: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let encoder = Encoder::build(encoder_config, rng)?;
        let mlp = MlpModel::new(mlp_config, encoder.output_dim() + usize::from(with_time), rng)?;
        Ok(Self {
            encoder_config: encoder_config.clone(),
            encoder,
            mlp,
            with_time,
        })
    }

    /// Reassembles a model from stored parts, checking that widths agree.
    pub fn from_parts(
        encoder_config: EncoderConfig,
        encoder: Encoder,
        mlp: MlpModel<f32>,
        with_time: bool,
    ) -> Result<Self> {
        let expected = encoder.output_dim() + usize::from(with_time);
        if mlp.input_dim() != expected {
            return Err(Error::Shape {
                expected,
                actual: mlp.input_dim(),
            });
        }
        Ok(Self {
            encoder_config,
            encoder,
            mlp,
            with_time,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.mlp.output_dim()
    }

    /// Grid parameters plus MLP weights and biases.
    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.mlp.param_count()
    }

    fn check_times(&self, n: usize, times: Option<&[f64]>) -> Result<()> {
        match (self.with_time, times) {
            (true, Some(t)) if t.len() == n => Ok(()),
            (true, Some(t)) => Err(Error::Shape {
                expected: n,
                actual: t.len(),
            }),
            (true, None) => Err(Error::InvalidInput("model expects a time input".into())),
            (false, Some(_)) => Err(Error::InvalidInput("model has no time input".into())),
            (false, None) => Ok(()),
        }
    }

    /// Encoded MLP inputs, one row per point.
    pub fn features(&self, points: &[SphericalPoint], times: Option<&[f64]>) -> Result<Array2<f32>> {
        self.check_times(points.len(), times)?;
        let mut x = Array2::<f32>::zeros((points.len(), self.input_dim()));
        match &self.encoder {
            Encoder::Grid(g) => g.encode_batch(points, times, x.view_mut())?,
            Encoder::Baseline(b) => {
                for (i, p) in points.iter().enumerate() {
                    for (o, v) in x.row_mut(i).iter_mut().zip(b.encode(p)) {
                        *o = v as f32;
                    }
                }
                if let Some(t) = times {
                    let col = self.input_dim() - 1;
                    for (i, &tv) in t.iter().enumerate() {
                        if !(0.0..=1.0).contains(&tv) {
                            return Err(Error::InvalidInput(format!("normalized timestep {tv} outside [0, 1]")));
                        }
                        x[[i, col]] = tv as f32;
                    }
                }
            }
        }
        Ok(x)
    }

    /// Precomputed lookups (grid) or features (baseline) for repeated passes
    /// over a fixed point set.
    pub fn prepare(&self, points: &[SphericalPoint], times: Option<&[f64]>) -> Result<Prepared> {
        self.check_times(points.len(), times)?;
        match &self.encoder {
            Encoder::Grid(g) => Ok(Prepared::Plan(g.plan(points, times)?)),
            Encoder::Baseline(_) => Ok(Prepared::Features(self.features(points, times)?)),
        }
    }

    /// MLP inputs for `rows` of a prepared point set.
    pub fn gather(&self, prepared: &Prepared, rows: &[usize]) -> Result<Array2<f32>> {
        match (prepared, &self.encoder) {
            (Prepared::Plan(plan), Encoder::Grid(g)) => g.gather(plan, rows),
            (Prepared::Features(f), Encoder::Baseline(_)) => Ok(f.select(ndarray::Axis(0), rows)),
            _ => Err(Error::InvalidInput(
                "prepared inputs belong to another encoder kind".into(),
            )),
        }
    }

    /// Predictions, row-major `points × output_dim`, in `f64`.
    pub fn predict(&self, points: &[SphericalPoint], times: Option<&[f64]>) -> Result<Vec<f64>> {
        const CHUNK: usize = 4096;
        self.check_times(points.len(), times)?;
        let mut out = Vec::with_capacity(points.len() * self.output_dim());
        for start in (0..points.len()).step_by(CHUNK) {
            let end = (start + CHUNK).min(points.len());
            let x = self.features(&points[start..end], times.map(|t| &t[start..end]))?;
            let y = self.mlp.predict(x.view())?;
            out.extend(y.iter().map(|&v| v as f64));
        }
        Ok(out)
    }

    /// [`predict`](Self::predict) split across `threads` workers. Results are
    /// identical to the single-threaded call.
    pub fn predict_parallel(
        &self,
        points: &[SphericalPoint],
        times: Option<&[f64]>,
        threads: usize,
    ) -> Result<Vec<f64>> {
        if threads <= 1 || points.len() < 2 * threads {
            return self.predict(points, times);
        }
        self.check_times(points.len(), times)?;
        let chunk = points.len().div_ceil(threads);
        let parts: Vec<Result<Vec<f64>>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..points.len())
                .step_by(chunk)
                .map(|start| {
                    let end = (start + chunk).min(points.len());
                    s.spawn(move || self.predict(&points[start..end], times.map(|t| &t[start..end])))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("prediction worker panicked"))
                .collect()
        });
        let mut out = Vec::with_capacity(points.len() * self.output_dim());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}

/// Inputs prepared once for a fixed point set.
#[derive(Debug, Clone)]
pub enum Prepared {
    Plan(EncodingPlan),
    Features(Array2<f32>),
}
