//! The imputation engine: genetic search over missing encoded slots, scored
//! by a trained auto-associative model (reconstruction error) or, for the
//! PCA variants, by the mismatch between the PCA projection and a regressor
//! trained to mimic it in compressed space. Hot-deck donor statistics
//! optionally bound the search.

use crate::anfis::AnfisBank;
use crate::data_model::{ColumnKind, EncodedMatrix};
use crate::ga::{run_ga, GaConfig, GaError, SearchBounds};
use crate::hotdeck::{bounds_from_matches, find_similar, HotDeckConfig, HotDeckError};
use crate::mlp::MlpModel;
use crate::par::map_indexed;
use crate::pca::PcaModel;
use crate::seeding::substream;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ImputeError {
    #[error("record length {got}, model takes {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("regressor emits {got} values, compression keeps {expected}")]
    WidthMismatch { got: usize, expected: usize },
    #[error("record has nothing missing")]
    NothingMissing,
    #[error("record is fully missing; imputation needs observed fields")]
    FullyMissing,
    #[error("method requires a model that was not provided: {0}")]
    MissingModel(&'static str),
    #[error("hot-deck methods require a donor pool")]
    PoolRequired,
    #[error("hot-deck matching failed: {0}")]
    HotDeck(#[from] HotDeckError),
    #[error("genetic search failed: {0}")]
    Search(String),
    #[error("model evaluation failed: {0}")]
    Model(String),
}

impl From<GaError> for ImputeError {
    fn from(e: GaError) -> Self {
        ImputeError::Search(e.to_string())
    }
}

/// Anything that maps a full record to a prediction vector.
pub trait Regressor: Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<Vec<f64>, ImputeError>;
}

impl Regressor for MlpModel {
    fn in_dim(&self) -> usize {
        self.n_in()
    }

    fn out_dim(&self) -> usize {
        self.n_out()
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>, ImputeError> {
        self.forward(x).map_err(|e| ImputeError::Model(e.to_string()))
    }
}

impl Regressor for AnfisBank {
    fn in_dim(&self) -> usize {
        self.n_in()
    }

    fn out_dim(&self) -> usize {
        self.n_out()
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>, ImputeError> {
        AnfisBank::predict(self, x).map_err(|e| ImputeError::Model(e.to_string()))
    }
}

/// An MLP whose sigmoid outputs are affinely mapped onto per-dimension
/// ranges, so it can regress unbounded targets such as PCA projections.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMlp {
    net: MlpModel,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ScaledMlp {
    pub fn new(net: MlpModel, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, ImputeError> {
        if lo.len() != net.n_out() || hi.len() != net.n_out() {
            return Err(ImputeError::WidthMismatch { got: lo.len(), expected: net.n_out() });
        }
        Ok(Self { net, lo, hi })
    }

    pub fn net(&self) -> &MlpModel {
        &self.net
    }

    /// Maps raw targets into the net's `[0, 1]` output space.
    pub fn scale_targets(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (lo, hi))| (v - lo) / (hi - lo))
            .collect()
    }
}

impl Regressor for ScaledMlp {
    fn in_dim(&self) -> usize {
        self.net.n_in()
    }

    fn out_dim(&self) -> usize {
        self.net.n_out()
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>, ImputeError> {
        let y = self.net.forward(x).map_err(|e| ImputeError::Model(e.to_string()))?;
        Ok(y.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (lo, hi))| lo + v * (hi - lo))
            .collect())
    }
}

/// Squared reconstruction error of an auto-associative model on a full
/// record: `|| record - f(record) ||^2`.
pub fn reconstruction_error(net: &dyn Regressor, record: &[f64]) -> Result<f64, ImputeError> {
    if record.len() != net.in_dim() {
        return Err(ImputeError::LengthMismatch { got: record.len(), expected: net.in_dim() });
    }
    if net.out_dim() != net.in_dim() {
        return Err(ImputeError::WidthMismatch { got: net.out_dim(), expected: net.in_dim() });
    }
    let y = net.predict(record)?;
    Ok(record.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Squared disagreement, in compressed space, between the PCA projection of
/// a record and a regressor trained to mimic it:
/// `|| compress(record) - f(record) ||^2`.
pub fn compression_error(
    pca: &PcaModel,
    net: &dyn Regressor,
    record: &[f64],
) -> Result<f64, ImputeError> {
    if net.out_dim() != pca.n_components() {
        return Err(ImputeError::WidthMismatch {
            got: net.out_dim(),
            expected: pca.n_components(),
        });
    }
    if record.len() != pca.dim() {
        return Err(ImputeError::LengthMismatch { got: record.len(), expected: pca.dim() });
    }
    let z = pca.compress(record).map_err(|e| ImputeError::Model(e.to_string()))?;
    let y = net.predict(record)?;
    Ok(z.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Which model family scores candidates, and whether the search space is
/// bounded by hot-deck donor statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodKind {
    NnGa,
    NfGa,
    NnPcaGa,
    NfPcaGa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Method {
    pub kind: MethodKind,
    pub hot_deck: bool,
}

impl Method {
    pub fn new(kind: MethodKind, hot_deck: bool) -> Self {
        Self { kind, hot_deck }
    }

    pub fn uses_pca(&self) -> bool {
        matches!(self.kind, MethodKind::NnPcaGa | MethodKind::NfPcaGa)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.kind {
            MethodKind::NnGa => "nn-ga",
            MethodKind::NfGa => "nf-ga",
            MethodKind::NnPcaGa => "nn-pca-ga",
            MethodKind::NfPcaGa => "nf-pca-ga",
        };
        if self.hot_deck {
            write!(f, "{base}+hd")
        } else {
            write!(f, "{base}")
        }
    }
}

impl std::str::FromStr for MethodKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nn-ga" => Ok(MethodKind::NnGa),
            "nf-ga" => Ok(MethodKind::NfGa),
            "nn-pca-ga" => Ok(MethodKind::NnPcaGa),
            "nf-pca-ga" => Ok(MethodKind::NfPcaGa),
            other => Err(format!(
                "unknown method `{other}` (expected nn-ga|nf-ga|nn-pca-ga|nf-pca-ga)"
            )),
        }
    }
}

/// Trained models available to the engine. Only the ones a method needs must
/// be present.
#[derive(Default)]
pub struct ModelSet {
    /// Auto-associative MLP (width -> width).
    pub auto_mlp: Option<MlpModel>,
    /// Auto-associative fuzzy bank, one model per encoded dimension.
    pub auto_anfis: Option<AnfisBank>,
    /// Fitted PCA over the training matrix.
    pub pca: Option<PcaModel>,
    /// MLP regressor mimicking the PCA projection.
    pub pca_mlp: Option<ScaledMlp>,
    /// Fuzzy bank mimicking the PCA projection.
    pub pca_anfis: Option<AnfisBank>,
}

/// Everything needed to train the models a method uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTrainingConfig {
    /// Hidden-layer width for the MLPs.
    pub hidden: usize,
    pub mlp: crate::mlp::TrainConfig,
    pub anfis_epochs: usize,
    pub anfis_lr: f64,
    pub cluster: crate::anfis::ClusterConfig,
    /// Components kept by the compression map.
    pub pca_k: usize,
}

impl Default for ModelTrainingConfig {
    fn default() -> Self {
        Self {
            hidden: 11,
            mlp: crate::mlp::TrainConfig::default(),
            anfis_epochs: 30,
            anfis_lr: 0.05,
            cluster: crate::anfis::ClusterConfig::default(),
            pca_k: 11,
        }
    }
}

impl ModelSet {
    /// Trains exactly the models `method` needs on the fully observed rows
    /// of the training matrix.
    pub fn train_for(
        method: Method,
        train: &EncodedMatrix,
        cfg: &ModelTrainingConfig,
    ) -> Result<ModelSet, ImputeError> {
        let data = train.observed_rows();
        if data.nrows() < 2 {
            return Err(ImputeError::Model("training matrix has < 2 fully observed rows".into()));
        }
        let width = train.width();
        let mut set = ModelSet::default();
        let wrap = |e: String| ImputeError::Model(e);

        match method.kind {
            MethodKind::NnGa => {
                let net = MlpModel::init(width, cfg.hidden, width, cfg.mlp.seed);
                let (net, _) = net.train(&data, &data, &cfg.mlp).map_err(|e| wrap(e.to_string()))?;
                set.auto_mlp = Some(net);
            }
            MethodKind::NfGa => {
                let bank = AnfisBank::build(&data, &data, &cfg.cluster)
                    .map_err(|e| wrap(e.to_string()))?;
                let (bank, _) = bank
                    .train(&data, &data, cfg.anfis_epochs, cfg.anfis_lr)
                    .map_err(|e| wrap(e.to_string()))?;
                set.auto_anfis = Some(bank);
            }
            MethodKind::NnPcaGa | MethodKind::NfPcaGa => {
                let pca = PcaModel::fit(&data, cfg.pca_k).map_err(|e| wrap(e.to_string()))?;
                let compressed: Vec<Vec<f64>> = (0..data.nrows())
                    .map(|i| pca.compress(&data.row(i).to_vec()).expect("fitted width"))
                    .collect();
                let k = cfg.pca_k;
                let mut targets = ndarray::Array2::zeros((data.nrows(), k));
                for (i, z) in compressed.iter().enumerate() {
                    for (j, v) in z.iter().enumerate() {
                        targets[[i, j]] = *v;
                    }
                }
                if method.kind == MethodKind::NnPcaGa {
                    // per-dimension ranges (slightly widened) map the
                    // unbounded projections into the sigmoid's output space
                    let mut lo = vec![f64::INFINITY; k];
                    let mut hi = vec![f64::NEG_INFINITY; k];
                    for z in &compressed {
                        for (j, v) in z.iter().enumerate() {
                            lo[j] = lo[j].min(*v);
                            hi[j] = hi[j].max(*v);
                        }
                    }
                    for j in 0..k {
                        let margin = 0.05 * (hi[j] - lo[j]).max(1e-6);
                        lo[j] -= margin;
                        hi[j] += margin;
                    }
                    let scaler = ScaledMlp::new(
                        MlpModel::init(width, cfg.hidden, k, cfg.mlp.seed),
                        lo,
                        hi,
                    )?;
                    let scaled_targets = ndarray::Array2::from_shape_fn((data.nrows(), k), |(i, j)| {
                        let row: Vec<f64> = (0..k).map(|c| targets[[i, c]]).collect();
                        scaler.scale_targets(&row)[j]
                    });
                    let (net, _) = scaler
                        .net()
                        .train(&data, &scaled_targets, &cfg.mlp)
                        .map_err(|e| wrap(e.to_string()))?;
                    set.pca_mlp = Some(ScaledMlp { net, ..scaler });
                } else {
                    let bank = AnfisBank::build(&data, &targets, &cfg.cluster)
                        .map_err(|e| wrap(e.to_string()))?;
                    let (bank, _) = bank
                        .train(&data, &targets, cfg.anfis_epochs, cfg.anfis_lr)
                        .map_err(|e| wrap(e.to_string()))?;
                    set.pca_anfis = Some(bank);
                }
                set.pca = Some(pca);
            }
        }
        Ok(set)
    }
}

enum Objective<'a> {
    Reconstruction(&'a dyn Regressor),
    Compression(&'a PcaModel, &'a dyn Regressor),
}

impl Objective<'_> {
    fn error(&self, record: &[f64]) -> Result<f64, ImputeError> {
        match self {
            Objective::Reconstruction(net) => reconstruction_error(*net, record),
            Objective::Compression(pca, net) => compression_error(pca, *net, record),
        }
    }
}

fn objective<'a>(method: Method, models: &'a ModelSet) -> Result<Objective<'a>, ImputeError> {
    match method.kind {
        MethodKind::NnGa => models
            .auto_mlp
            .as_ref()
            .map(|m| Objective::Reconstruction(m as &dyn Regressor))
            .ok_or(ImputeError::MissingModel("auto_mlp")),
        MethodKind::NfGa => models
            .auto_anfis
            .as_ref()
            .map(|m| Objective::Reconstruction(m as &dyn Regressor))
            .ok_or(ImputeError::MissingModel("auto_anfis")),
        MethodKind::NnPcaGa => {
            let pca = models.pca.as_ref().ok_or(ImputeError::MissingModel("pca"))?;
            let net = models.pca_mlp.as_ref().ok_or(ImputeError::MissingModel("pca_mlp"))?;
            Ok(Objective::Compression(pca, net as &dyn Regressor))
        }
        MethodKind::NfPcaGa => {
            let pca = models.pca.as_ref().ok_or(ImputeError::MissingModel("pca"))?;
            let net = models.pca_anfis.as_ref().ok_or(ImputeError::MissingModel("pca_anfis"))?;
            Ok(Objective::Compression(pca, net as &dyn Regressor))
        }
    }
}

/// A completed record plus search diagnostics.
#[derive(Debug, Clone)]
pub struct ImputedRecord {
    /// Full record with the genetic search's answers written into the
    /// previously masked slots (one-hot groups snapped to pure one-hot).
    pub values: Vec<f64>,
    /// Slots that were imputed, ascending.
    pub imputed_slots: Vec<usize>,
    /// Bounds the search ran under.
    pub search_bounds: SearchBounds,
    /// Raw best genes before one-hot post-processing.
    pub ga_genes: Vec<f64>,
    /// Negated objective error recomputed on the final record.
    pub best_fitness: f64,
    /// Wall time of the search, milliseconds.
    pub wall_ms: f64,
    /// Final donor threshold when hot-deck bounding was used.
    pub hot_deck_threshold: Option<f64>,
}

/// Imputes one masked record. Genes are the masked slots; the search
/// maximizes the negated model error of the filled-in record.
#[allow(clippy::too_many_arguments)]
pub fn impute_record(
    values: &[f64],
    mask: &[bool],
    matrix: &EncodedMatrix,
    method: Method,
    models: &ModelSet,
    ga_cfg: &GaConfig,
    hd_cfg: &HotDeckConfig,
    pool: Option<&EncodedMatrix>,
) -> Result<ImputedRecord, ImputeError> {
    let started = Instant::now();
    let width = matrix.width();
    if values.len() != width || mask.len() != width {
        return Err(ImputeError::LengthMismatch { got: values.len(), expected: width });
    }
    let imputed_slots: Vec<usize> = (0..width).filter(|&j| !mask[j]).collect();
    if imputed_slots.is_empty() {
        return Err(ImputeError::NothingMissing);
    }
    if imputed_slots.len() == width {
        return Err(ImputeError::FullyMissing);
    }
    let obj = objective(method, models)?;

    let mut hot_deck_threshold = None;
    let search_bounds = if method.hot_deck {
        let pool = pool.ok_or(ImputeError::PoolRequired)?;
        let result = find_similar(values, mask, pool, hd_cfg)?;
        hot_deck_threshold = Some(result.final_threshold);
        bounds_from_matches(&result)
    } else {
        SearchBounds::unit_box(imputed_slots.len()).expect("at least one gene")
    };

    let fill = |genes: &[f64]| -> Vec<f64> {
        let mut record = values.to_vec();
        for (slot, gene) in imputed_slots.iter().zip(genes) {
            record[*slot] = *gene;
        }
        record
    };
    let fitness = |genes: &[f64]| -> f64 {
        match obj.error(&fill(genes)) {
            Ok(e) => -e,
            Err(_) => f64::NAN, // surfaces as NonFiniteFitness
        }
    };
    let outcome = run_ga(fitness, &search_bounds, ga_cfg)?;

    let mut completed = fill(&outcome.best_genes);
    // fully masked one-hot groups become pure one-hot by argmax
    let schema = matrix.schema();
    for (c, col) in schema.columns().iter().enumerate() {
        if let ColumnKind::Categorical { .. } = col.kind {
            let slots = schema.slot_range(c);
            if slots.clone().all(|j| !mask[j]) {
                let best = slots
                    .clone()
                    .max_by(|&a, &b| completed[a].partial_cmp(&completed[b]).unwrap())
                    .expect("non-empty group");
                for j in slots {
                    completed[j] = if j == best { 1.0 } else { 0.0 };
                }
            }
        }
    }
    let best_fitness = -obj.error(&completed)?;

    Ok(ImputedRecord {
        values: completed,
        imputed_slots,
        search_bounds,
        ga_genes: outcome.best_genes,
        best_fitness,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        hot_deck_threshold,
    })
}

/// Per-row outcome of a table run.
#[derive(Debug, Clone)]
pub struct RowDiagnostics {
    pub row: usize,
    pub imputed_slots: Vec<usize>,
    pub best_fitness: f64,
    pub wall_ms: f64,
    pub hot_deck_threshold: Option<f64>,
}

/// Table-level imputation outcome. Observed entries are bit-identical to the
/// input; failures are collected per row without aborting the rest.
pub struct ImputationResult {
    pub completed: EncodedMatrix,
    pub method: Method,
    pub records: Vec<RowDiagnostics>,
    pub failures: Vec<(usize, ImputeError)>,
    pub total_wall_ms: f64,
}

/// Imputes every deficient row of a table. Rows are independent; per-row GA
/// seeds derive from `(seed, row)`, so results do not depend on evaluation
/// order or thread count. Rows with nothing missing pass through untouched.
#[allow(clippy::too_many_arguments)]
pub fn impute_table(
    test: &EncodedMatrix,
    method: Method,
    models: &ModelSet,
    ga_cfg: &GaConfig,
    hd_cfg: &HotDeckConfig,
    pool: Option<&EncodedMatrix>,
    seed: u64,
) -> ImputationResult {
    let started = Instant::now();
    let outcomes = map_indexed(test.n_rows(), |row| {
        if test.row_fully_observed(row) {
            return None;
        }
        let row_cfg = GaConfig { seed: substream(seed, row as u64), ..ga_cfg.clone() };
        Some((
            row,
            impute_record(
                &test.row(row),
                &test.row_mask(row),
                test,
                method,
                models,
                &row_cfg,
                hd_cfg,
                pool,
            ),
        ))
    });

    let mut completed = test.clone();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes.into_iter().flatten() {
        let (row, result) = outcome;
        match result {
            Ok(imputed) => {
                completed.set_row(row, &imputed.values, &vec![true; test.width()]);
                records.push(RowDiagnostics {
                    row,
                    imputed_slots: imputed.imputed_slots,
                    best_fitness: imputed.best_fitness,
                    wall_ms: imputed.wall_ms,
                    hot_deck_threshold: imputed.hot_deck_threshold,
                });
            }
            Err(e) => failures.push((row, e)),
        }
    }
    ImputationResult {
        completed,
        method,
        records,
        failures,
        total_wall_ms: started.elapsed().as_secs_f64() * 1e3,
    }
}

impl ImputationResult {
    /// Per-row diagnostics CSV: row index, method, masked raw columns, best
    /// fitness, wall milliseconds.
    pub fn write_diagnostics_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "row,method,masked_columns,best_fitness,wall_ms")?;
        let schema = self.completed.schema();
        for rec in &self.records {
            let mut cols: Vec<String> = Vec::new();
            for &slot in &rec.imputed_slots {
                let name = schema.columns()[schema.column_of_slot(slot)].name.clone();
                if cols.last() != Some(&name) {
                    cols.push(name);
                }
            }
            writeln!(
                out,
                "{},{},{},{},{:.3}",
                rec.row,
                self.method,
                cols.join("+"),
                rec.best_fitness,
                rec.wall_ms
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{
        default_schema, default_synth_spec, encode, inject_missing, synthesize,
        MissingnessMechanism,
    };
    use crate::mlp::MlpModel;

    fn sample_matrix(n: usize, seed: u64) -> EncodedMatrix {
        let schema = default_schema();
        let t = synthesize(&schema, n, seed, &default_synth_spec()).unwrap();
        encode(&t).unwrap()
    }

    /// An MLP that reproduces its input exactly: identity is not reachable
    /// with sigmoid outputs, so instead check the zero-weight fixed point.
    #[test]
    fn reconstruction_error_is_zero_at_a_fixed_point() {
        let m = MlpModel::init(4, 2, 4, 1);
        let m = m.with_flat_weights(&vec![0.0; m.n_weights()]).unwrap();
        // zero net outputs 0.5 everywhere; the all-0.5 record is a fixed point
        let record = vec![0.5; 4];
        let e = reconstruction_error(&m, &record).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn reconstruction_error_matches_hand_arithmetic() {
        let m = MlpModel::init(2, 2, 2, 3);
        let record = [0.3, 0.8];
        let y = m.forward(&record).unwrap();
        let expected = (record[0] - y[0]).powi(2) + (record[1] - y[1]).powi(2);
        let got = reconstruction_error(&m, &record).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn compression_error_is_zero_when_the_net_mimics_the_projection() {
        // build a PCA and a "net" that IS the projection via a scaled
        // wrapper is impossible exactly; instead verify with the identity:
        // k=1 hand case against manual projection arithmetic
        let data = ndarray::array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [1.0, 1.0]];
        let pca = PcaModel::fit(&data, 1).unwrap();
        struct Exact<'a>(&'a PcaModel);
        impl Regressor for Exact<'_> {
            fn in_dim(&self) -> usize {
                self.0.dim()
            }
            fn out_dim(&self) -> usize {
                self.0.n_components()
            }
            fn predict(&self, x: &[f64]) -> Result<Vec<f64>, ImputeError> {
                self.0.compress(x).map_err(|e| ImputeError::Model(e.to_string()))
            }
        }
        let net = Exact(&pca);
        for record in [[0.3, 0.9], [1.5, 0.2]] {
            let e = compression_error(&pca, &net, &record).unwrap();
            assert!(e.abs() < 1e-24);
        }
    }

    #[test]
    fn compression_error_matches_manual_projection() {
        let data = ndarray::array![[0.0, 0.0], [2.0, 0.0], [0.0, 0.0], [2.0, 0.0]];
        let pca = PcaModel::fit(&data, 1).unwrap();
        // mean (1, 0), eigenvector (1, 0): compress(x) = x0 - 1
        struct Fixed(Vec<f64>);
        impl Regressor for Fixed {
            fn in_dim(&self) -> usize {
                2
            }
            fn out_dim(&self) -> usize {
                1
            }
            fn predict(&self, _x: &[f64]) -> Result<Vec<f64>, ImputeError> {
                Ok(self.0.clone())
            }
        }
        let net = Fixed(vec![0.25]);
        let record = [1.7, 0.4];
        let manual = ((record[0] - 1.0) - 0.25f64).powi(2);
        let got = compression_error(&pca, &net, &record).unwrap();
        assert!((got - manual).abs() < 1e-12, "{got} vs {manual}");
    }

    #[test]
    fn compression_error_only_reacts_to_map_disagreement() {
        // when the net output is pinned, perturbing a record entry changes
        // the error only through the projection's loading on that entry
        let data = ndarray::array![[0.0, 0.0], [2.0, 0.0], [0.0, 0.1], [2.0, -0.1]];
        let pca = PcaModel::fit(&data, 1).unwrap();
        struct Fixed;
        impl Regressor for Fixed {
            fn in_dim(&self) -> usize {
                2
            }
            fn out_dim(&self) -> usize {
                1
            }
            fn predict(&self, _x: &[f64]) -> Result<Vec<f64>, ImputeError> {
                Ok(vec![0.0])
            }
        }
        let base = [1.0, 0.0];
        let e0 = compression_error(&pca, &Fixed, &base).unwrap();
        // the second loading is ~0, so perturbing entry 1 barely moves the error
        let e1 = compression_error(&pca, &Fixed, &[1.0, 0.5]).unwrap();
        assert!((e1 - e0).abs() < 1e-3, "{e0} vs {e1}");
        // perturbing entry 0 (loading ~1) moves it a lot
        let e2 = compression_error(&pca, &Fixed, &[1.5, 0.0]).unwrap();
        assert!((e2 - e0).abs() > 0.1, "{e0} vs {e2}");
    }

    /// A linear auto-encoder with a known fixed point: the net always
    /// returns the planted record, so the reconstruction error is uniquely
    /// zeroed by it.
    struct Planted(Vec<f64>);

    impl Regressor for Planted {
        fn in_dim(&self) -> usize {
            self.0.len()
        }
        fn out_dim(&self) -> usize {
            self.0.len()
        }
        fn predict(&self, _x: &[f64]) -> Result<Vec<f64>, ImputeError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn search_recovers_a_planted_value() {
        let matrix = sample_matrix(20, 1);
        let truth = matrix.row(3);
        let planted = Planted(truth.clone());
        let mut record = truth.clone();
        record[0] = 0.5; // pretend the age slot is unknown
        let bounds = SearchBounds::unit_box(1).unwrap();
        let fitness = |genes: &[f64]| {
            let mut r = record.clone();
            r[0] = genes[0];
            -reconstruction_error(&planted, &r).unwrap()
        };
        let out = run_ga(fitness, &bounds, &GaConfig { seed: 9, ..GaConfig::default() }).unwrap();
        assert!(
            (out.best_genes[0] - truth[0]).abs() < 0.05,
            "recovered {} vs planted {}",
            out.best_genes[0],
            truth[0]
        );
    }

    fn trained_auto_mlp(matrix: &EncodedMatrix) -> MlpModel {
        let data = matrix.values().clone();
        let m = MlpModel::init(matrix.width(), 11, matrix.width(), 5);
        let cfg = crate::mlp::TrainConfig { epochs: 60, ..Default::default() };
        m.train(&data, &data, &cfg).unwrap().0
    }

    #[test]
    fn hot_deck_imputations_stay_inside_their_bounds() {
        let pool = sample_matrix(120, 2);
        let masked = inject_missing(
            &pool,
            &MissingnessMechanism::Mcar { rate: 0.4 },
            &["age".into()],
            7,
        )
        .unwrap();
        let models = ModelSet { auto_mlp: Some(trained_auto_mlp(&pool)), ..Default::default() };
        let method = Method::new(MethodKind::NnGa, true);
        for row in 0..masked.n_rows() {
            if masked.row_fully_observed(row) {
                continue;
            }
            let rec = impute_record(
                &masked.row(row),
                &masked.row_mask(row),
                &masked,
                method,
                &models,
                &GaConfig { seed: 100 + row as u64, ..GaConfig::default() },
                &HotDeckConfig::default(),
                Some(&pool),
            )
            .unwrap();
            assert!(
                rec.search_bounds.contains(&rec.ga_genes),
                "genes {:?} escaped bounds {:?}",
                rec.ga_genes,
                rec.search_bounds
            );
            assert!(rec.hot_deck_threshold.is_some());
        }
    }

    #[test]
    fn three_masked_columns_span_all_their_slots() {
        let matrix = sample_matrix(30, 3);
        let masked = inject_missing(
            &matrix,
            &MissingnessMechanism::Mcar { rate: 1.0 },
            &["age".into(), "education".into(), "hiv".into()],
            1,
        )
        .unwrap();
        let schema = masked.schema();
        let expected: Vec<usize> = vec![
            schema.slot_range(0).start,
            schema.slot_range(1).start,
            schema.slot_range(4).start,
        ];
        let models = ModelSet { auto_mlp: Some(trained_auto_mlp(&matrix)), ..Default::default() };
        let rec = impute_record(
            &masked.row(0),
            &masked.row_mask(0),
            &masked,
            Method::new(MethodKind::NnGa, false),
            &models,
            &GaConfig::default(),
            &HotDeckConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(rec.imputed_slots, expected);
    }

    #[test]
    fn nothing_missing_and_fully_missing_are_rejected() {
        let matrix = sample_matrix(20, 4);
        let models = ModelSet { auto_mlp: Some(trained_auto_mlp(&matrix)), ..Default::default() };
        let full = impute_record(
            &matrix.row(0),
            &matrix.row_mask(0),
            &matrix,
            Method::new(MethodKind::NnGa, false),
            &models,
            &GaConfig::default(),
            &HotDeckConfig::default(),
            None,
        );
        assert!(matches!(full, Err(ImputeError::NothingMissing)));
        let mask = vec![false; matrix.width()];
        let gone = impute_record(
            &matrix.row(0),
            &mask,
            &matrix,
            Method::new(MethodKind::NnGa, false),
            &models,
            &GaConfig::default(),
            &HotDeckConfig::default(),
            None,
        );
        assert!(matches!(gone, Err(ImputeError::FullyMissing)));
    }

    #[test]
    fn fully_masked_one_hot_groups_become_pure_one_hot() {
        let matrix = sample_matrix(40, 5);
        let masked = inject_missing(
            &matrix,
            &MissingnessMechanism::Mcar { rate: 1.0 },
            &["race".into()],
            2,
        )
        .unwrap();
        let models = ModelSet { auto_mlp: Some(trained_auto_mlp(&matrix)), ..Default::default() };
        let rec = impute_record(
            &masked.row(0),
            &masked.row_mask(0),
            &masked,
            Method::new(MethodKind::NnGa, false),
            &models,
            &GaConfig::default(),
            &HotDeckConfig::default(),
            None,
        )
        .unwrap();
        let slots = masked.schema().slot_range(5);
        let group: Vec<f64> = slots.map(|j| rec.values[j]).collect();
        let ones = group.iter().filter(|&&v| v == 1.0).count();
        let zeros = group.iter().filter(|&&v| v == 0.0).count();
        assert_eq!((ones, zeros), (1, group.len() - 1), "group {group:?}");
    }

    #[test]
    fn reported_fitness_is_self_consistent() {
        let matrix = sample_matrix(40, 6);
        let masked = inject_missing(
            &matrix,
            &MissingnessMechanism::Mcar { rate: 0.5 },
            &["education".into()],
            3,
        )
        .unwrap();
        let mlp = trained_auto_mlp(&matrix);
        let models = ModelSet { auto_mlp: Some(mlp.clone()), ..Default::default() };
        for row in 0..masked.n_rows() {
            if masked.row_fully_observed(row) {
                continue;
            }
            let rec = impute_record(
                &masked.row(row),
                &masked.row_mask(row),
                &masked,
                Method::new(MethodKind::NnGa, false),
                &models,
                &GaConfig::default(),
                &HotDeckConfig::default(),
                None,
            )
            .unwrap();
            let recomputed = -reconstruction_error(&mlp, &rec.values).unwrap();
            assert!((recomputed - rec.best_fitness).abs() < 1e-12);
        }
    }

    #[test]
    fn tables_pass_through_untouched_when_nothing_is_masked() {
        let matrix = sample_matrix(25, 7);
        let models = ModelSet { auto_mlp: Some(trained_auto_mlp(&matrix)), ..Default::default() };
        let result = impute_table(
            &matrix,
            Method::new(MethodKind::NnGa, false),
            &models,
            &GaConfig::default(),
            &HotDeckConfig::default(),
            None,
            11,
        );
        assert_eq!(result.completed.values(), matrix.values());
        assert!(result.records.is_empty());
        assert!(result.failures.is_empty());
    }

    #[test]
    fn table_runs_are_deterministic_and_preserve_observed_entries() {
        let matrix = sample_matrix(60, 8);
        let masked = inject_missing(
            &matrix,
            &MissingnessMechanism::Mcar { rate: 0.3 },
            &["age".into(), "hiv".into()],
            9,
        )
        .unwrap();
        let models = ModelSet { auto_mlp: Some(trained_auto_mlp(&matrix)), ..Default::default() };
        let method = Method::new(MethodKind::NnGa, false);
        let a = impute_table(
            &masked,
            method,
            &models,
            &GaConfig::default(),
            &HotDeckConfig::default(),
            None,
            21,
        );
        let b = impute_table(
            &masked,
            method,
            &models,
            &GaConfig::default(),
            &HotDeckConfig::default(),
            None,
            21,
        );
        assert_eq!(a.completed.values(), b.completed.values());
        assert!(a.failures.is_empty());
        // observed entries bit-identical
        for i in 0..masked.n_rows() {
            for j in 0..masked.width() {
                if masked.mask()[[i, j]] {
                    assert_eq!(a.completed.values()[[i, j]], masked.values()[[i, j]]);
                } else {
                    assert!(a.completed.mask()[[i, j]], "imputed entries become observed");
                    let v = a.completed.values()[[i, j]];
                    assert!((0.0..=1.0).contains(&v), "imputed value {v} outside [0,1]");
                }
            }
        }
    }

    #[test]
    fn diagnostics_csv_lists_one_line_per_imputed_row() {
        let matrix = sample_matrix(30, 9);
        let masked = inject_missing(
            &matrix,
            &MissingnessMechanism::Mcar { rate: 0.5 },
            &["age".into()],
            4,
        )
        .unwrap();
        let models = ModelSet { auto_mlp: Some(trained_auto_mlp(&matrix)), ..Default::default() };
        let result = impute_table(
            &masked,
            Method::new(MethodKind::NnGa, false),
            &models,
            &GaConfig::default(),
            &HotDeckConfig::default(),
            None,
            3,
        );
        let mut buf = Vec::new();
        result.write_diagnostics_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "row,method,masked_columns,best_fitness,wall_ms");
        assert_eq!(lines.len(), result.records.len() + 1);
        assert!(lines[1].contains("nn-ga"));
        assert!(lines[1].contains("age"));
    }

    #[test]
    fn missing_models_are_reported() {
        let matrix = sample_matrix(20, 10);
        let masked = inject_missing(
            &matrix,
            &MissingnessMechanism::Mcar { rate: 1.0 },
            &["age".into()],
            5,
        )
        .unwrap();
        let models = ModelSet::default();
        let res = impute_record(
            &masked.row(0),
            &masked.row_mask(0),
            &masked,
            Method::new(MethodKind::NnPcaGa, false),
            &models,
            &GaConfig::default(),
            &HotDeckConfig::default(),
            None,
        );
        assert!(matches!(res, Err(ImputeError::MissingModel("pca"))));
        let res = impute_record(
            &masked.row(0),
            &masked.row_mask(0),
            &masked,
            Method::new(MethodKind::NnGa, true),
            &models,
            &GaConfig::default(),
            &HotDeckConfig::default(),
            None,
        );
        assert!(matches!(
            res,
            Err(ImputeError::MissingModel("auto_mlp")) | Err(ImputeError::PoolRequired)
        ));
    }
}
