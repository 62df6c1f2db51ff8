//! C ABI over the `bsg` crate.
//!
//! Every fallible function returns a [`BsgStatus`]; on failure the message is
//! available from [`bsg_last_error_message`] until the next failing call on the
//! same thread. Handles are opaque and must be released with the matching
//! `*_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use bsg::autodiff::Matrix;
use bsg::eval::rank_metrics;
use bsg::graph::{generate_sbm, load_graph, smoothness_delta, Graph, SbmConfig};
use bsg::losses::mi_from_mse;
use bsg::trainer::{train, Pretext, TrainConfig};
use bsg::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    NonFinite = 6,
    Infeasible = 7,
    Runtime = 8,
    Panic = 9,
}

impl From<&Error> for BsgStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Config(_) => BsgStatus::InvalidArgument,
            Error::Io { .. } => BsgStatus::Io,
            Error::Parse { .. } => BsgStatus::Parse,
            Error::DimensionMismatch(_) | Error::ShapeMismatch { .. } | Error::IndexOutOfRange { .. } => {
                BsgStatus::DimensionMismatch
            }
            Error::NonFinite(_) | Error::LogDomain(_) | Error::UnboundedInformation(_) => BsgStatus::NonFinite,
            Error::Infeasible(_) | Error::Edgeless(_) | Error::EmptySet(_) | Error::EmptyTensor(_) => {
                BsgStatus::Infeasible
            }
            _ => BsgStatus::Runtime,
        }
    }
}

/// A graph with node features and optional labels.
pub struct BsgGraph(Graph);

/// A dense row-major `rows × cols` embedding matrix.
pub struct BsgEmbeddings(Matrix);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsgPretext {
    EdgeRecon = 0,
    FeatureRecon = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsgSbmConfig {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_noise: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsgTrainConfig {
    pub mask_ratio: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub margin: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub hidden: usize,
    pub emb_dim: usize,
    pub decoder_hidden: usize,
    pub seed: u64,
    pub pretext: BsgPretext,
}

/// Ranking quality in percent.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsgRankMetrics {
    pub auc: f64,
    pub ap: f64,
}

impl From<BsgSbmConfig> for SbmConfig {
    fn from(c: BsgSbmConfig) -> Self {
        SbmConfig {
            blocks: c.blocks,
            nodes_per_block: c.nodes_per_block,
            p_in: c.p_in,
            p_out: c.p_out,
            feature_dim: c.feature_dim,
            feature_noise: c.feature_noise,
            seed: c.seed,
        }
    }
}

impl From<BsgTrainConfig> for TrainConfig {
    fn from(c: BsgTrainConfig) -> Self {
        TrainConfig {
            mask_ratio: c.mask_ratio,
            lambda1: c.lambda1,
            lambda2: c.lambda2,
            lambda3: c.lambda3,
            margin: c.margin,
            learning_rate: c.learning_rate,
            weight_decay: c.weight_decay,
            epochs: c.epochs,
            hidden: c.hidden,
            emb_dim: c.emb_dim,
            decoder_hidden: c.decoder_hidden,
            seed: c.seed,
            pretext: match c.pretext {
                BsgPretext::EdgeRecon => Pretext::EdgeRecon,
                BsgPretext::FeatureRecon => Pretext::FeatureRecon,
            },
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(BsgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(BsgStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BsgStatus::NullPointer, format!("{what} is null"))
}

fn record(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs were replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BsgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BsgStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            record(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            record(format!("internal panic: {msg}"));
            BsgStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    let s = deref(p, what).map(|_| CStr::from_ptr(p))?;
    let s = s
        .to_str()
        .map_err(|_| Failure(BsgStatus::InvalidArgument, format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bsg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bsg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The two-block fixture: 100 nodes per block, p_in 0.05, p_out 0.005,
/// 16 features with unit noise.
#[no_mangle]
pub extern "C" fn bsg_sbm_config_fixture(seed: u64) -> BsgSbmConfig {
    let c = SbmConfig::fixture(seed);
    BsgSbmConfig {
        blocks: c.blocks,
        nodes_per_block: c.nodes_per_block,
        p_in: c.p_in,
        p_out: c.p_out,
        feature_dim: c.feature_dim,
        feature_noise: c.feature_noise,
        seed: c.seed,
    }
}

/// Default training settings (Cora loss weights, Adam at 0.01, 500 epochs).
#[no_mangle]
pub extern "C" fn bsg_train_config_default() -> BsgTrainConfig {
    let c = TrainConfig::default();
    BsgTrainConfig {
        mask_ratio: c.mask_ratio,
        lambda1: c.lambda1,
        lambda2: c.lambda2,
        lambda3: c.lambda3,
        margin: c.margin,
        learning_rate: c.learning_rate,
        weight_decay: c.weight_decay,
        epochs: c.epochs,
        hidden: c.hidden,
        emb_dim: c.emb_dim,
        decoder_hidden: c.decoder_hidden,
        seed: c.seed,
        pretext: match c.pretext {
            Pretext::EdgeRecon => BsgPretext::EdgeRecon,
            Pretext::FeatureRecon => BsgPretext::FeatureRecon,
        },
    }
}

/// # Safety
/// `config` must point to a valid config and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn bsg_graph_generate_sbm(config: *const BsgSbmConfig, out: *mut *mut BsgGraph) -> BsgStatus {
    guard(|| {
        let cfg = *deref(config, "config")?;
        let graph = generate_sbm(&cfg.into())?;
        put(out, Box::into_raw(Box::new(BsgGraph(graph))), "out")
    })
}

/// Loads a graph from an edge list, a feature matrix and an optional label
/// file (`labels` may be NULL).
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bsg_graph_load(
    edges: *const c_char,
    features: *const c_char,
    labels: *const c_char,
    out: *mut *mut BsgGraph,
) -> BsgStatus {
    guard(|| {
        let edges = path_arg(edges, "edges")?;
        let features = path_arg(features, "features")?;
        let labels = if labels.is_null() { None } else { Some(path_arg(labels, "labels")?) };
        let graph = load_graph(&edges, &features, labels.as_deref())?;
        put(out, Box::into_raw(Box::new(BsgGraph(graph))), "out")
    })
}

/// # Safety
/// `graph` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn bsg_graph_num_nodes(graph: *const BsgGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.num_nodes())
}

/// Number of undirected edges.
///
/// # Safety
/// `graph` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn bsg_graph_num_edges(graph: *const BsgGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.num_undirected_edges())
}

/// # Safety
/// `graph` must come from this library and not be used afterwards. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn bsg_graph_free(graph: *mut BsgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Trains on `graph` and returns full-graph embeddings.
///
/// # Safety
/// `graph` and `config` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bsg_train(
    graph: *const BsgGraph,
    config: *const BsgTrainConfig,
    out: *mut *mut BsgEmbeddings,
) -> BsgStatus {
    guard(|| {
        let graph = deref(graph, "graph")?;
        let cfg = *deref(config, "config")?;
        let result = train(&graph.0, &cfg.into())?;
        put(out, Box::into_raw(Box::new(BsgEmbeddings(result.embeddings))), "out")
    })
}

/// Copies `rows × cols` row-major values into a new embedding handle.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn bsg_embeddings_from_data(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut BsgEmbeddings,
) -> BsgStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(BsgStatus::InvalidArgument, "rows * cols overflows".into()))?;
        let values = if len == 0 {
            Vec::new()
        } else {
            deref(data, "data")?;
            std::slice::from_raw_parts(data, len).to_vec()
        };
        let m = Matrix::from_vec(rows, cols, values)?;
        put(out, Box::into_raw(Box::new(BsgEmbeddings(m))), "out")
    })
}

/// # Safety
/// `emb` must be valid; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bsg_embeddings_shape(emb: *const BsgEmbeddings, rows: *mut usize, cols: *mut usize) -> BsgStatus {
    guard(|| {
        let emb = deref(emb, "embeddings")?;
        put(rows, emb.0.rows(), "rows")?;
        put(cols, emb.0.cols(), "cols")
    })
}

/// Copies the embeddings row-major into `buffer`, which must hold at least
/// `rows * cols` doubles; `len` is its capacity.
///
/// # Safety
/// `buffer` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bsg_embeddings_copy(emb: *const BsgEmbeddings, buffer: *mut f64, len: usize) -> BsgStatus {
    guard(|| {
        let values = deref(emb, "embeddings")?.0.as_slice();
        if len < values.len() {
            return Err(Failure(
                BsgStatus::DimensionMismatch,
                format!("buffer holds {len} values, embeddings need {}", values.len()),
            ));
        }
        if values.is_empty() {
            return Ok(());
        }
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buffer, values.len());
        Ok(())
    })
}

/// # Safety
/// `emb` must come from this library and not be used afterwards. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn bsg_embeddings_free(emb: *mut BsgEmbeddings) {
    if !emb.is_null() {
        drop(Box::from_raw(emb));
    }
}

/// Smoothness of `emb` over the edges of `graph`.
///
/// # Safety
/// Handles must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bsg_smoothness(graph: *const BsgGraph, emb: *const BsgEmbeddings, out: *mut f64) -> BsgStatus {
    guard(|| {
        let graph = deref(graph, "graph")?;
        let emb = deref(emb, "embeddings")?;
        put(out, smoothness_delta(&graph.0, &emb.0)?, "out")
    })
}

/// ROC-AUC and average precision of `scores` against 0/1 `labels`.
///
/// # Safety
/// `scores` and `labels` must point to `len` readable elements.
#[no_mangle]
pub unsafe extern "C" fn bsg_rank_metrics(
    scores: *const f64,
    labels: *const u8,
    len: usize,
    out: *mut BsgRankMetrics,
) -> BsgStatus {
    guard(|| {
        deref(scores, "scores")?;
        deref(labels, "labels")?;
        let scores = std::slice::from_raw_parts(scores, len);
        let labels: Vec<bool> = std::slice::from_raw_parts(labels, len).iter().map(|&l| l != 0).collect();
        let m = rank_metrics(scores, &labels)?;
        put(out, BsgRankMetrics { auc: m.auc, ap: m.ap }, "out")
    })
}

/// Gaussian mutual information implied by a reconstruction MSE in `d` dimensions.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bsg_mi_from_mse(mse: f64, d: usize, out: *mut f64) -> BsgStatus {
    guard(|| put(out, mi_from_mse(mse, d)?, "out"))
}
