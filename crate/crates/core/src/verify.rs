//! Consistency checks over rendered ground truth.
//!
//! * **Round trip**: follow optical flow and disparity through the cycle
//!   left `t` → left `t+1` → right `t+1` → right `t` → left `t`; consistent
//!   data returns to the start pixel up to nearest-pixel sampling.
//! * **Forward-backward**: the backward motion found at a pixel's forward
//!   target must cancel its forward motion.
//! * **Ego-motion**: on static surfaces the tracked point must equal the
//!   reference point carried by the camera's own motion.
//!
//! Checks operate on [`StoredBundle`]s, i.e. the 32-bit data as written.
//! Every hop samples the nearest pixel (round half up per component).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{RigidTransform, Vec3};
use crate::io::bundle::{bundle_dir, frame_dir_name, read_bundle, AnchorId, StoredBundle};
use crate::io::{FloatMap, FormatError, Mask};
use crate::scene::{CameraIntrinsics, Direction, Side};

/// Largest distance between a point and its nearest pixel center.
pub const MAX_ROUNDING_DISTANCE: f64 = 0.5 * std::f64::consts::SQRT_2;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("incomplete input: missing {0}")]
    Incomplete(String),
    #[error("inconsistent input: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckKind {
    RoundTrip,
    ForwardBackward,
    EgoMotion,
}

impl CheckKind {
    pub const ALL: [CheckKind; 3] = [
        CheckKind::RoundTrip,
        CheckKind::ForwardBackward,
        CheckKind::EgoMotion,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CheckKind::RoundTrip => "roundtrip",
            CheckKind::ForwardBackward => "fb",
            CheckKind::EgoMotion => "ego",
        }
    }
}

impl std::str::FromStr for CheckKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "roundtrip" => Ok(CheckKind::RoundTrip),
            "fb" => Ok(CheckKind::ForwardBackward),
            "ego" => Ok(CheckKind::EgoMotion),
            other => Err(format!("unknown check `{other}`")),
        }
    }
}

/// Statistic compared against the tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PassStatistic {
    P99,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Base round-trip tolerance in pixels; a gradient term is added per dataset.
    pub round_trip_px: f64,
    pub forward_backward_m: f64,
    pub ego_motion_m: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            round_trip_px: 0.5,
            forward_backward_m: 1e-4,
            ego_motion_m: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub width: usize,
    pub height: usize,
    /// Per-pixel error, NaN where the pixel was not evaluated.
    pub error_map: Vec<f64>,
    pub evaluated: usize,
    pub skipped: usize,
    pub max: f64,
    pub mean: f64,
    pub p99: f64,
    /// Effective tolerance the statistic was compared with.
    pub tolerance: f64,
    pub statistic: PassStatistic,
    pub pass: bool,
}

/// Nearest-rank percentile of an ascending slice; 0 when empty.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

enum PixelOutcome {
    NotApplicable,
    Skipped,
    Error(f64),
}

impl CheckResult {
    fn from_outcomes(
        width: usize,
        height: usize,
        outcomes: Vec<PixelOutcome>,
        tolerance: f64,
        statistic: PassStatistic,
    ) -> Self {
        let mut error_map = vec![f64::NAN; outcomes.len()];
        let mut errors = Vec::new();
        let mut skipped = 0;
        for (slot, outcome) in error_map.iter_mut().zip(&outcomes) {
            match outcome {
                PixelOutcome::NotApplicable => {}
                PixelOutcome::Skipped => skipped += 1,
                PixelOutcome::Error(e) => {
                    *slot = *e;
                    errors.push(*e);
                }
            }
        }
        errors.sort_by(f64::total_cmp);
        let evaluated = errors.len();
        let max = errors.last().copied().unwrap_or(0.0);
        let mean = if evaluated == 0 {
            0.0
        } else {
            errors.iter().sum::<f64>() / evaluated as f64
        };
        let p99 = percentile(&errors, 0.99);
        let measured = match statistic {
            PassStatistic::P99 => p99,
            PassStatistic::Max => max,
        };
        Self {
            width,
            height,
            error_map,
            evaluated,
            skipped,
            max,
            mean,
            p99,
            tolerance,
            statistic,
            // NaN errors sort last and fail the comparison
            pass: measured <= tolerance,
        }
    }
}

fn pixel_outcomes<F>(width: usize, height: usize, f: F) -> Vec<PixelOutcome>
where
    F: Fn(usize, usize, usize) -> PixelOutcome + Sync,
{
    (0..height)
        .into_par_iter()
        .flat_map_iter(|row| (0..width).map(move |col| (row, col)).collect::<Vec<_>>())
        .map(|(row, col)| f(row * width + col, col, row))
        .collect()
}

fn flow_at(map: &FloatMap, i: usize) -> Option<(f64, f64)> {
    let p = map.pixel(i);
    let (u, v) = (p[0] as f64, p[1] as f64);
    (u.is_finite() && v.is_finite()).then_some((u, v))
}

fn scalar_at(map: &FloatMap, i: usize) -> Option<f64> {
    let x = map.data[i] as f64;
    x.is_finite().then_some(x)
}

fn motion_at(map: &FloatMap, i: usize) -> Option<Vec3> {
    let p = map.pixel(i);
    let m = Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64);
    m.iter().all(|c| c.is_finite()).then_some(m)
}

fn mesh_of(bundle: &StoredBundle, i: usize) -> Option<u32> {
    bundle.anchors[i].map(|a| a.mesh_id)
}

/// For every pixel, the largest difference to a valid right or lower
/// neighbour on the same mesh (per-pixel finite-difference gradient).
fn local_gradients(bundle: &StoredBundle, map: &FloatMap) -> Vec<Option<f64>> {
    let (w, h) = (map.width, map.height);
    let value = |i: usize| -> Option<&[f32]> {
        let px = map.pixel(i);
        (bundle.valid.data[i] && px.iter().all(|c| c.is_finite())).then_some(px)
    };
    let diff = |a: &[f32], b: &[f32]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    (0..w * h)
        .map(|i| {
            let here = value(i)?;
            let mesh = mesh_of(bundle, i);
            let (col, row) = (i % w, i / w);
            let mut neighbours = Vec::with_capacity(4);
            if col + 1 < w {
                neighbours.push(i + 1);
            }
            if col > 0 {
                neighbours.push(i - 1);
            }
            if row + 1 < h {
                neighbours.push(i + w);
            }
            if row > 0 {
                neighbours.push(i - w);
            }
            neighbours
                .into_iter()
                .filter(|n| mesh_of(bundle, *n) == mesh)
                .filter_map(|n| value(n).map(|px| diff(here, px)))
                .reduce(f64::max)
        })
        .collect()
}

/// 99th percentile of the local gradient magnitude of `map` (units per pixel).
pub fn gradient_estimate(bundle: &StoredBundle, map: &FloatMap) -> f64 {
    let mut grads: Vec<f64> = local_gradients(bundle, map).into_iter().flatten().collect();
    grads.sort_by(f64::total_cmp);
    percentile(&grads, 0.99)
}

/// Operator norm of `R - I` for a rotation `R`, i.e. `2 sin(angle / 2)`.
fn rotation_deviation(r: &nalgebra::Matrix3<f64>) -> f64 {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    (2.0 * (1.0 - cos)).sqrt()
}

/// Per mesh, an estimate of how fast the motion changes with the position of
/// the surface point: the largest `|dm| / |dQ|` between valid 4-neighbours of
/// the same mesh, where `Q` is the point rebuilt from depth.
fn motion_lipschitz(bundle: &StoredBundle) -> BTreeMap<Option<u32>, f64> {
    let intr = bundle.meta.intrinsics;
    let (w, h) = (bundle.width(), bundle.height());
    let point = |i: usize| -> Option<(Vec3, Vec3)> {
        if !bundle.valid.data[i] {
            return None;
        }
        let q = intr.back_project((i % w) as f64, (i / w) as f64) * scalar_at(&bundle.depth, i)?;
        Some((q, motion_at(&bundle.scene_flow, i)?))
    };
    let mut lipschitz: BTreeMap<Option<u32>, f64> = BTreeMap::new();
    let ego = rotation_deviation(bundle.meta.ego_motion.rotation());
    for i in 0..w * h {
        let mesh = mesh_of(bundle, i);
        let Some((q, m)) = point(i) else { continue };
        let entry = lipschitz.entry(mesh).or_insert(0.0);
        if bundle.static_mask.data[i] {
            *entry = entry.max(ego);
        }
        let right = (i % w + 1 < w).then_some(i + 1);
        let down = (i / w + 1 < h).then_some(i + w);
        for n in [right, down].into_iter().flatten() {
            if mesh_of(bundle, n) != mesh {
                continue;
            }
            if let Some((qn, mn)) = point(n) {
                let dq = (qn - q).norm();
                if dq > 0.0 {
                    *entry = entry.max((mn - m).norm() / dq);
                }
            }
        }
    }
    lipschitz
}

/// The four bundles of one stereo frame pair.
#[derive(Clone, Copy, Default)]
pub struct DatasetPair<'a> {
    pub left_forward: Option<&'a StoredBundle>,
    pub right_forward: Option<&'a StoredBundle>,
    pub left_backward: Option<&'a StoredBundle>,
    pub right_backward: Option<&'a StoredBundle>,
}

fn require<'a>(
    bundle: Option<&'a StoredBundle>,
    name: &str,
    side: Side,
    direction: Direction,
) -> Result<&'a StoredBundle, VerifyError> {
    let b = bundle.ok_or_else(|| VerifyError::Incomplete(name.to_string()))?;
    if b.meta.side != side || b.meta.direction != direction {
        return Err(VerifyError::Mismatch(format!(
            "{name} is {} {}",
            b.meta.side, b.meta.direction
        )));
    }
    Ok(b)
}

fn same_size(a: &StoredBundle, b: &StoredBundle) -> Result<(), VerifyError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(VerifyError::Mismatch(format!(
            "image sizes {}x{} and {}x{} differ",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Outcome of the round-trip check together with its adaptive tolerance.
#[derive(Clone, Debug)]
pub struct RoundTripResult {
    pub result: CheckResult,
    /// Summed gradient estimate of the three sampled fields (pixels per pixel).
    pub lipschitz: f64,
}

/// Cycle left `t` → left `t+1` → right `t+1` → right `t` → left `t`.
///
/// Hops that leave the image, land on an invalid pixel or land on a different
/// mesh than the start pixel are counted as skipped. The effective tolerance is
/// `base_tolerance_px + MAX_ROUNDING_DISTANCE * L` where `L` sums the gradient
/// estimates of the sampled fields; it reduces to the base tolerance on
/// spatially constant fields.
pub fn round_trip_check(pair: &DatasetPair<'_>, base_tolerance_px: f64) -> Result<RoundTripResult, VerifyError> {
    let lf = require(pair.left_forward, "left forward bundle at frame t", Side::Left, Direction::Forward)?;
    let rf = require(pair.right_forward, "right forward bundle at frame t", Side::Right, Direction::Forward)?;
    let lb = require(pair.left_backward, "left backward bundle at frame t+1", Side::Left, Direction::Backward)?;
    let rb = require(pair.right_backward, "right backward bundle at frame t+1", Side::Right, Direction::Backward)?;
    for b in [rf, lb, rb] {
        same_size(lf, b)?;
    }
    let t = lf.meta.frame;
    if rf.meta.frame != t || lb.meta.frame != t + 1 || rb.meta.frame != t + 1 {
        return Err(VerifyError::Mismatch(format!(
            "frames {}/{}/{}/{} do not form the pair ({t}, {})",
            lf.meta.frame,
            rf.meta.frame,
            lb.meta.frame,
            rb.meta.frame,
            t + 1
        )));
    }
    let intr: CameraIntrinsics = lf.meta.intrinsics;
    let (w, h) = (lf.width(), lf.height());

    let outcomes = pixel_outcomes(w, h, |i, col, row| {
        if !lf.valid.data[i] {
            return PixelOutcome::NotApplicable;
        }
        let start_mesh = mesh_of(lf, i);
        let hop = |bundle: &StoredBundle, u: f64, v: f64| {
            intr.pixel_index(u, v)
                .filter(|j| bundle.valid.data[*j] && mesh_of(bundle, *j) == start_mesh)
        };
        let trip = || -> Option<f64> {
            let (fu, fv) = flow_at(&lf.flow, i)?;
            let (u1, v1) = (col as f64 + fu, row as f64 + fv);
            let d1 = scalar_at(&lb.disparity, hop(lb, u1, v1)?)?;
            let (u2, v2) = (u1 - d1, v1);
            let (bu, bv) = flow_at(&rb.flow, hop(rb, u2, v2)?)?;
            let (u3, v3) = (u2 + bu, v2 + bv);
            let d3 = scalar_at(&rf.disparity, hop(rf, u3, v3)?)?;
            let (u4, v4) = (u3 + d3, v3);
            Some(((u4 - col as f64).powi(2) + (v4 - row as f64).powi(2)).sqrt())
        };
        match trip() {
            Some(e) => PixelOutcome::Error(e),
            None => PixelOutcome::Skipped,
        }
    });

    let lipschitz = gradient_estimate(lb, &lb.disparity)
        + gradient_estimate(rb, &rb.flow)
        + gradient_estimate(rf, &rf.disparity);
    let tolerance = base_tolerance_px + MAX_ROUNDING_DISTANCE * lipschitz;
    Ok(RoundTripResult {
        result: CheckResult::from_outcomes(w, h, outcomes, tolerance, PassStatistic::P99),
        lipschitz,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardBackwardOptions {
    pub tolerance_m: f64,
    /// Subtract the motion change expected from snapping the target to the
    /// nearest pixel; see [`forward_backward_check`].
    pub rounding_allowance: bool,
}

impl Default for ForwardBackwardOptions {
    fn default() -> Self {
        Self {
            tolerance_m: Tolerances::default().forward_backward_m,
            rounding_allowance: true,
        }
    }
}

/// Forward motion at `p` plus backward motion at the nearest pixel `j` to
/// `p + flow(p)` should vanish. Targets outside the image, on invalid pixels
/// or on a different `(mesh, triangle)` anchor are skipped.
///
/// Snapping to `j` samples a surface point `Q_j` next to the exact target
/// `X = q_t(p) + m_f(p)`. If the backward map on the surface is affine with
/// linear part `G`, the residual equals `(G - I)(Q_j - X)`. With the rounding
/// allowance enabled, the error is the residual minus `L * |Q_j - X|`, where
/// `L` bounds `|G - I|` on the mesh: the largest ratio `|dm| / |dQ|` between
/// same-mesh neighbours of the backward bundle and, for static meshes, the
/// rotation angle term `|R - I|` of the backward ego-motion.
pub fn forward_backward_check(
    fwd: &StoredBundle,
    bwd: &StoredBundle,
    options: &ForwardBackwardOptions,
) -> Result<CheckResult, VerifyError> {
    if fwd.meta.direction != Direction::Forward || bwd.meta.direction != Direction::Backward {
        return Err(VerifyError::Mismatch(format!(
            "expected forward then backward bundles, got {} and {}",
            fwd.meta.direction, bwd.meta.direction
        )));
    }
    if fwd.meta.side != bwd.meta.side {
        return Err(VerifyError::Mismatch(format!(
            "bundles belong to the {} and {} cameras",
            fwd.meta.side, bwd.meta.side
        )));
    }
    if bwd.meta.frame != fwd.meta.target_frame || bwd.meta.target_frame != fwd.meta.frame {
        return Err(VerifyError::Mismatch(format!(
            "backward bundle covers {} -> {}, forward covers {} -> {}",
            bwd.meta.frame, bwd.meta.target_frame, fwd.meta.frame, fwd.meta.target_frame
        )));
    }
    same_size(fwd, bwd)?;
    let intr = fwd.meta.intrinsics;
    let (w, h) = (fwd.width(), fwd.height());
    let lipschitz = if options.rounding_allowance {
        Some(motion_lipschitz(bwd))
    } else {
        None
    };
    let bwd_intr = bwd.meta.intrinsics;

    let outcomes = pixel_outcomes(w, h, |i, col, row| {
        if !fwd.valid.data[i] {
            return PixelOutcome::NotApplicable;
        }
        let eval = || -> Option<f64> {
            let (fu, fv) = flow_at(&fwd.flow, i)?;
            let (qu, qv) = (col as f64 + fu, row as f64 + fv);
            let j = intr.pixel_index(qu, qv)?;
            let same_anchor: Option<AnchorId> = fwd.anchors[i];
            if !bwd.valid.data[j] || bwd.anchors[j] != same_anchor {
                return None;
            }
            let m_f = motion_at(&fwd.scene_flow, i)?;
            let residual = (m_f + motion_at(&bwd.scene_flow, j)?).norm();
            let allowance = match &lipschitz {
                Some(per_mesh) => {
                    let target = intr.back_project(col as f64, row as f64) * scalar_at(&fwd.depth, i)? + m_f;
                    let (ju, jv) = ((j % w) as f64, (j / w) as f64);
                    let sampled = bwd_intr.back_project(ju, jv) * scalar_at(&bwd.depth, j)?;
                    let mesh = same_anchor.map(|a| a.mesh_id);
                    per_mesh.get(&mesh).copied().unwrap_or(0.0) * (sampled - target).norm()
                }
                None => 0.0,
            };
            Some((residual - allowance).max(0.0))
        };
        match eval() {
            Some(e) => PixelOutcome::Error(e),
            None => PixelOutcome::Skipped,
        }
    });
    Ok(CheckResult::from_outcomes(w, h, outcomes, options.tolerance_m, PassStatistic::P99))
}

/// On pixels marked in `static_mask`, compares the tracked point with the
/// reference point moved by the bundle's ego-motion. The reference point is
/// rebuilt from depth along the pixel's ray.
pub fn ego_motion_check(
    bundle: &StoredBundle,
    static_mask: &Mask,
    tolerance_m: f64,
) -> Result<CheckResult, VerifyError> {
    let (w, h) = (bundle.width(), bundle.height());
    if static_mask.width != w || static_mask.height != h {
        return Err(VerifyError::Mismatch("static mask size differs from bundle".into()));
    }
    let intr = bundle.meta.intrinsics;
    let ego: RigidTransform = bundle.meta.ego_motion;
    let outcomes = pixel_outcomes(w, h, |i, col, row| {
        if !bundle.valid.data[i] {
            return PixelOutcome::NotApplicable;
        }
        if !static_mask.data[i] {
            return PixelOutcome::Skipped;
        }
        let eval = || -> Option<f64> {
            let depth = scalar_at(&bundle.depth, i)?;
            let q_t = intr.back_project(col as f64, row as f64) * depth;
            let q_t1 = q_t + motion_at(&bundle.scene_flow, i)?;
            Some((q_t1 - ego.transform_point(&q_t)).norm())
        };
        // a valid pixel without finite depth or motion is itself an error
        PixelOutcome::Error(eval().unwrap_or(f64::INFINITY))
    });
    Ok(CheckResult::from_outcomes(w, h, outcomes, tolerance_m, PassStatistic::Max))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckSelection(pub BTreeSet<CheckKind>);

impl CheckSelection {
    pub fn all() -> Self {
        Self(CheckKind::ALL.into_iter().collect())
    }

    pub fn contains(&self, kind: CheckKind) -> bool {
        self.0.contains(&kind)
    }
}

/// Numbers reported for one executed check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckSummary {
    pub evaluated: usize,
    pub skipped: usize,
    pub mean: f64,
    pub p99: f64,
    pub max: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl From<&CheckResult> for CheckSummary {
    fn from(r: &CheckResult) -> Self {
        Self {
            evaluated: r.evaluated,
            skipped: r.skipped,
            mean: r.mean,
            p99: r.p99,
            max: r.max,
            tolerance: r.tolerance,
            pass: r.pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportItem {
    pub frame: usize,
    /// `left`, `right` or `stereo`.
    pub camera: String,
    /// Check name; ego-motion items carry the bundle direction (`ego:forward`).
    pub check: String,
    pub outcome: Result<CheckSummary, String>,
}

impl ReportItem {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(s) if s.pass)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub root: PathBuf,
    pub items: Vec<ReportItem>,
    /// Problems not tied to a single check, e.g. an unreadable directory.
    pub errors: Vec<String>,
}

impl VerificationReport {
    /// True iff at least one check ran and every item passed without error.
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && !self.items.is_empty() && self.items.iter().all(ReportItem::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportItem> {
        self.items.iter().filter(|i| !i.passed())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "verification of {}", self.root.display());
        for item in &self.items {
            match &item.outcome {
                Ok(r) => {
                    let _ = writeln!(
                        s,
                        "frame {:>4}  {:<6} {:<13} {}  evaluated {:>8}  skipped {:>8}  mean {:.3e}  p99 {:.3e}  max {:.3e}  tol {:.3e}",
                        item.frame,
                        item.camera,
                        item.check,
                        if r.pass { "PASS" } else { "FAIL" },
                        r.evaluated,
                        r.skipped,
                        r.mean,
                        r.p99,
                        r.max,
                        r.tolerance
                    );
                }
                Err(e) => {
                    let _ = writeln!(
                        s,
                        "frame {:>4}  {:<6} {:<13} ERROR {e}",
                        item.frame, item.camera, item.check
                    );
                }
            }
        }
        for e in &self.errors {
            let _ = writeln!(s, "error: {e}");
        }
        if self.items.is_empty() {
            let _ = writeln!(s, "no checks were run");
        }
        let _ = writeln!(s, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }

    /// One CSV line per check after a header line.
    pub fn to_summary(&self) -> String {
        let mut s = String::from("frame,camera,check,evaluated,skipped,mean,p99,max,result\n");
        for item in &self.items {
            match &item.outcome {
                Ok(r) => {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{:e},{:e},{:e},{}",
                        item.frame,
                        item.camera,
                        item.check,
                        r.evaluated,
                        r.skipped,
                        r.mean,
                        r.p99,
                        r.max,
                        if r.pass { "pass" } else { "fail" }
                    );
                }
                Err(_) => {
                    let _ = writeln!(s, "{},{},{},,,,,,error", item.frame, item.camera, item.check);
                }
            }
        }
        s
    }

    /// Writes `report.txt` and `summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let text = dir.join("report.txt");
        let summary = dir.join("summary.csv");
        std::fs::write(&text, self.to_text())?;
        std::fs::write(&summary, self.to_summary())?;
        Ok((text, summary))
    }
}

fn frames_in(root: &Path) -> Result<Vec<usize>, String> {
    let entries = std::fs::read_dir(root).map_err(|e| format!("{}: {e}", root.display()))?;
    let mut frames: Vec<usize> = entries
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            let frame: usize = name.parse().ok()?;
            (frame_dir_name(frame) == name).then_some(frame)
        })
        .collect();
    frames.sort_unstable();
    Ok(frames)
}

type Loaded = Result<StoredBundle, String>;

fn load(root: &Path, frame: usize, side: Side, direction: Direction) -> Option<Loaded> {
    let dir = bundle_dir(root, frame, side, direction);
    dir.is_dir()
        .then(|| read_bundle(&dir).map_err(|e| format!("{}: {e}", dir.display())))
}

fn summarize(r: Result<CheckResult, VerifyError>) -> Result<CheckSummary, String> {
    r.map(|c| CheckSummary::from(&c)).map_err(|e| e.to_string())
}

/// Runs the selected checks over every frame pair and camera under `root`.
///
/// A dataset without any backward bundle is treated as forward-only: only the
/// ego-motion check applies. Unreadable bundles become error items.
pub fn verify_dataset(root: &Path, checks: &CheckSelection, tolerances: &Tolerances) -> VerificationReport {
    let mut report = VerificationReport {
        root: root.to_path_buf(),
        items: Vec::new(),
        errors: Vec::new(),
    };
    let frames = match frames_in(root) {
        Ok(f) => f,
        Err(e) => {
            report.errors.push(e);
            return report;
        }
    };
    let has_backward = frames.iter().any(|f| {
        Side::BOTH
            .iter()
            .any(|s| bundle_dir(root, *f, *s, Direction::Backward).is_dir())
    });

    let items: Vec<Vec<ReportItem>> = frames
        .par_iter()
        .map(|&frame| {
            let mut items = Vec::new();
            let fwd = Side::BOTH.map(|s| load(root, frame, s, Direction::Forward));
            let bwd_here = Side::BOTH.map(|s| load(root, frame, s, Direction::Backward));

            if checks.contains(CheckKind::EgoMotion) {
                for (loaded, side, direction) in fwd
                    .iter()
                    .zip(Side::BOTH)
                    .map(|(l, s)| (l, s, Direction::Forward))
                    .chain(bwd_here.iter().zip(Side::BOTH).map(|(l, s)| (l, s, Direction::Backward)))
                {
                    let Some(loaded) = loaded else { continue };
                    let outcome = loaded.as_ref().map_err(Clone::clone).and_then(|b| {
                        summarize(ego_motion_check(b, &b.static_mask, tolerances.ego_motion_m))
                    });
                    items.push(ReportItem {
                        frame,
                        camera: side.to_string(),
                        check: format!("{}:{}", CheckKind::EgoMotion.as_str(), direction),
                        outcome,
                    });
                }
            }

            let wants_pairs = checks.contains(CheckKind::ForwardBackward) || checks.contains(CheckKind::RoundTrip);
            if !has_backward || !wants_pairs || fwd.iter().all(Option::is_none) {
                return items;
            }
            let next = frame + 1;
            let bwd_next = Side::BOTH.map(|s| load(root, next, s, Direction::Backward));
            let missing = |name: String| -> String { format!("missing {name}") };
            let get = |slot: &Option<Loaded>, name: String| -> Result<StoredBundle, String> {
                match slot {
                    Some(Ok(b)) => Ok(b.clone()),
                    Some(Err(e)) => Err(e.clone()),
                    None => Err(missing(name)),
                }
            };
            let lf = get(&fwd[0], format!("left forward bundle at frame {frame}"));
            let rf = get(&fwd[1], format!("right forward bundle at frame {frame}"));
            let lb = get(&bwd_next[0], format!("left backward bundle at frame {next}"));
            let rb = get(&bwd_next[1], format!("right backward bundle at frame {next}"));

            if checks.contains(CheckKind::ForwardBackward) {
                for (side, f, b) in [(Side::Left, &lf, &lb), (Side::Right, &rf, &rb)] {
                    let outcome = match (f, b) {
                        (Ok(f), Ok(b)) => summarize(forward_backward_check(
                            f,
                            b,
                            &ForwardBackwardOptions {
                                tolerance_m: tolerances.forward_backward_m,
                                rounding_allowance: true,
                            },
                        )),
                        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                    };
                    items.push(ReportItem {
                        frame,
                        camera: side.to_string(),
                        check: CheckKind::ForwardBackward.as_str().into(),
                        outcome,
                    });
                }
            }
            if checks.contains(CheckKind::RoundTrip) {
                let outcome = match (&lf, &rf, &lb, &rb) {
                    (Ok(lf), Ok(rf), Ok(lb), Ok(rb)) => {
                        let pair = DatasetPair {
                            left_forward: Some(lf),
                            right_forward: Some(rf),
                            left_backward: Some(lb),
                            right_backward: Some(rb),
                        };
                        round_trip_check(&pair, tolerances.round_trip_px)
                            .map(|r| CheckSummary::from(&r.result))
                            .map_err(|e| e.to_string())
                    }
                    (Err(e), ..) | (_, Err(e), ..) | (_, _, Err(e), _) | (.., Err(e)) => Err(e.clone()),
                };
                items.push(ReportItem {
                    frame,
                    camera: "stereo".into(),
                    check: CheckKind::RoundTrip.as_str().into(),
                    outcome,
                });
            }
            items
        })
        .collect();
    report.items = items.into_iter().flatten().collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentile() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.99), 99.0);
        assert_eq!(percentile(&v, 1.0), 100.0);
        assert_eq!(percentile(&[5.0], 0.99), 5.0);
        assert_eq!(percentile(&[], 0.99), 0.0);
        let w: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(percentile(&w, 0.99), 990.0);
    }

    #[test]
    fn check_names_parse() {
        for kind in CheckKind::ALL {
            assert_eq!(kind.as_str().parse::<CheckKind>().unwrap(), kind);
        }
        assert!("all".parse::<CheckKind>().is_err());
    }

    #[test]
    fn empty_report_fails() {
        let report = VerificationReport {
            root: PathBuf::from("x"),
            items: Vec::new(),
            errors: Vec::new(),
        };
        assert!(!report.passed());
        assert!(report.to_text().contains("no checks were run"));
        assert_eq!(report.to_summary().lines().count(), 1);
    }
}
