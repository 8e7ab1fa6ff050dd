//! Rényi entropy, point information gain and the PIE focus metric.
//!
//! For a channel histogram `n_j` with `N = Σ n_j` the Rényi entropy is
//! `H_α = log2(Σ (n_j / N)^α) / (1 - α)`. The point information gain of a
//! level is the entropy change caused by removing one pixel of that level,
//! `Γ(j) = H(n) - H(n - e_j)`. PIE aggregates Γ over the occupied levels.

use std::fmt;
use std::str::FromStr;

use crate::bayer::Channel;
use crate::error::{Error, Result};
use crate::image::RawImage;
use crate::par;

/// Order of the Rényi entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenyiParams {
    alpha: f64,
}

impl RenyiParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) || alpha == 1.0 {
            return Err(Error::InvalidParameter(format!(
                "Rényi alpha must be positive and != 1, got {alpha}"
            )));
        }
        Ok(RenyiParams { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn is_quadratic(&self) -> bool {
        self.alpha == 2.0
    }
}

impl Default for RenyiParams {
    fn default() -> Self {
        RenyiParams { alpha: 2.0 }
    }
}

/// How per-level gains are summed into PIE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// One removal per occupied intensity level.
    #[default]
    Distinct,
    /// Each level's gain weighted by its pixel count.
    Occurrence,
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distinct" => Ok(Weighting::Distinct),
            "occurrence" => Ok(Weighting::Occurrence),
            _ => Err(Error::InvalidParameter(format!("unknown weighting '{s}'"))),
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Distinct => "distinct",
            Weighting::Occurrence => "occurrence",
        })
    }
}

/// Occupancy of each intensity level within one mosaic channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl ChannelHistogram {
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        ChannelHistogram { counts, total }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn occupied(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(j, &n)| (j, n))
    }
}

/// Histograms of all four mosaic channels in one pass, indexed by [`Channel::index`].
pub fn channel_histograms(image: &RawImage) -> [ChannelHistogram; 4] {
    let levels = 1usize << image.bit_depth();
    let mut counts: [Vec<u64>; 4] = std::array::from_fn(|_| vec![0u64; levels]);
    let w = image.width() as usize;
    for (y, row) in image.samples().chunks_exact(w).enumerate() {
        let y = y as u32;
        let even = image.channel_of(0, y).index();
        let odd = image.channel_of(1, y).index();
        for (x, &v) in row.iter().enumerate() {
            let c = if x & 1 == 0 { even } else { odd };
            counts[c][v as usize] += 1;
        }
    }
    counts.map(ChannelHistogram::from_counts)
}

/// Histogram of one mosaic channel.
pub fn histogram(image: &RawImage, channel: Channel) -> ChannelHistogram {
    let levels = 1usize << image.bit_depth();
    let mut counts = vec![0u64; levels];
    let w = image.width() as usize;
    for (y, row) in image.samples().chunks_exact(w).enumerate() {
        let y = y as u32;
        for (x, &v) in row.iter().enumerate() {
            if image.channel_of(x as u32, y) == channel {
                counts[v as usize] += 1;
            }
        }
    }
    ChannelHistogram::from_counts(counts)
}

/// Entropy (bits) of a histogram given `Σ n_j^α` and `N`.
fn entropy_from_power_sum(power_sum: f64, total: u64, p: &RenyiParams) -> f64 {
    let log_ratio = power_sum.log2() - p.alpha * (total as f64).log2();
    log_ratio / (1.0 - p.alpha)
}

/// Quadratic entropy from integer sums: `-log2(Σ n_j² / N²)`.
fn quadratic_entropy(square_sum: u128, total: u64) -> f64 {
    let n = total as u128;
    -((square_sum as f64) / ((n * n) as f64)).log2()
}

fn power_sum(h: &ChannelHistogram, p: &RenyiParams) -> f64 {
    h.occupied().map(|(_, n)| (n as f64).powf(p.alpha)).sum()
}

fn square_sum(h: &ChannelHistogram) -> u128 {
    h.occupied().map(|(_, n)| u128::from(n) * u128::from(n)).sum()
}

pub fn renyi_entropy(h: &ChannelHistogram, p: &RenyiParams) -> Result<f64> {
    if h.total == 0 {
        return Err(Error::Histogram("empty histogram".into()));
    }
    if p.is_quadratic() {
        return Ok(quadratic_entropy(square_sum(h), h.total));
    }
    Ok(entropy_from_power_sum(power_sum(h, p), h.total, p))
}

/// Precomputed sums for evaluating Γ of many levels without rebuilding the histogram.
struct GainContext {
    params: RenyiParams,
    total: u64,
    full_entropy: f64,
    square_sum: u128,
    power_sum: f64,
}

impl GainContext {
    fn new(h: &ChannelHistogram, params: RenyiParams) -> Self {
        let (square_sum, power_sum, full_entropy) = if params.is_quadratic() {
            let s = square_sum(h);
            (s, 0.0, quadratic_entropy(s, h.total))
        } else {
            let s = power_sum(h, &params);
            (0, s, entropy_from_power_sum(s, h.total, &params))
        };
        GainContext {
            params,
            total: h.total,
            full_entropy,
            square_sum,
            power_sum,
        }
    }

    /// Γ for a level holding `n >= 1` pixels.
    fn gain(&self, n: u64) -> f64 {
        let reduced_total = self.total - 1;
        let reduced = if self.params.is_quadratic() {
            // n² -> (n-1)² changes the sum by 2n - 1
            let s = self.square_sum - (2 * u128::from(n) - 1);
            quadratic_entropy(s, reduced_total)
        } else {
            let a = self.params.alpha;
            let s = self.power_sum - (n as f64).powf(a) + ((n - 1) as f64).powf(a);
            entropy_from_power_sum(s, reduced_total, &self.params)
        };
        self.full_entropy - reduced
    }
}

/// Point information gain of removing one pixel at `level`.
pub fn pig(h: &ChannelHistogram, level: usize, p: &RenyiParams) -> Result<f64> {
    let n = h.counts.get(level).copied().unwrap_or(0);
    if n == 0 {
        return Err(Error::Histogram(format!("level {level} is unoccupied")));
    }
    if h.total < 2 {
        return Err(Error::Histogram("need at least 2 pixels".into()));
    }
    Ok(GainContext::new(h, *p).gain(n))
}

/// PIE of a histogram.
pub fn pie_of_histogram(h: &ChannelHistogram, p: &RenyiParams, weighting: Weighting) -> Result<f64> {
    if h.total < 2 {
        return Err(Error::Histogram(format!(
            "channel has {} pixel(s), need at least 2",
            h.total
        )));
    }
    let ctx = GainContext::new(h, *p);
    Ok(h.occupied()
        .map(|(_, n)| {
            let g = ctx.gain(n);
            match weighting {
                Weighting::Distinct => g,
                Weighting::Occurrence => n as f64 * g,
            }
        })
        .sum())
}

pub fn pie(image: &RawImage, channel: Channel, p: &RenyiParams, weighting: Weighting) -> Result<f64> {
    pie_of_histogram(&histogram(image, channel), p, weighting)
}

/// PIE of each channel of each frame of a z-stack.
#[derive(Debug, Clone, PartialEq)]
pub struct FocusProfile {
    /// `values[frame][channel.index()]`
    pub values: Vec<[f64; 4]>,
}

impl FocusProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn channel_mean(&self, frame: usize) -> f64 {
        self.values[frame].iter().sum::<f64>() / 4.0
    }
}

/// PIE for every frame, computed frame-parallel.
pub fn focus_profile(frames: &[RawImage], p: &RenyiParams, weighting: Weighting) -> Result<FocusProfile> {
    let values = par::try_map(frames, |frame| -> Result<[f64; 4]> {
        let hists = channel_histograms(frame);
        let mut out = [0.0; 4];
        for (slot, h) in out.iter_mut().zip(&hists) {
            *slot = pie_of_histogram(h, p, weighting)?;
        }
        Ok(out)
    })?;
    Ok(FocusProfile { values })
}

/// How the in-focus frame is chosen from a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FocusRule {
    #[default]
    Max,
    Min,
    Manual(usize),
}

impl FromStr for FocusRule {
    type Err = Error;

    /// `max`, `min` or `manual:<index>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(FocusRule::Max),
            "min" => Ok(FocusRule::Min),
            _ => s
                .strip_prefix("manual:")
                .and_then(|i| i.parse().ok())
                .map(FocusRule::Manual)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown focus rule '{s}'"))),
        }
    }
}

impl fmt::Display for FocusRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FocusRule::Max => f.write_str("max"),
            FocusRule::Min => f.write_str("min"),
            FocusRule::Manual(i) => write!(f, "manual:{i}"),
        }
    }
}

/// Index of the selected frame. Ties on the channel-mean PIE go to the frame
/// closest to the stack centre, then to the lower index.
pub fn select_focus(profile: &FocusProfile, rule: FocusRule) -> Result<usize> {
    if profile.is_empty() {
        return Err(Error::Empty("focus profile".into()));
    }
    let n = profile.len();
    let pick_max = match rule {
        FocusRule::Manual(i) if i < n => return Ok(i),
        FocusRule::Manual(i) => {
            return Err(Error::InvalidParameter(format!(
                "manual focus index {i} outside stack of {n} frames"
            )))
        }
        FocusRule::Max => true,
        FocusRule::Min => false,
    };
    let means: Vec<f64> = (0..n).map(|i| profile.channel_mean(i)).collect();
    let target = if pick_max {
        means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        means.iter().copied().fold(f64::INFINITY, f64::min)
    };
    // distance to centre measured in half-frames to stay in integers
    let centre2 = n as i64 - 1;
    (0..n)
        .filter(|&i| means[i] == target)
        .min_by_key(|&i| ((2 * i as i64 - centre2).abs(), i))
        .ok_or_else(|| Error::InvalidParameter("profile contains NaN".into()))
}

/// Text table of a profile: `frame z PIE_R PIE_G1 PIE_G2 PIE_B`.
pub fn format_profile(profile: &FocusProfile, z_positions: Option<&[f64]>, selected: usize) -> String {
    let mut out = String::from("# frame_index z_position PIE_R PIE_G1 PIE_G2 PIE_B\n");
    for (i, v) in profile.values.iter().enumerate() {
        let z = z_positions
            .and_then(|z| z.get(i))
            .map_or_else(|| "-".to_string(), |z| format!("{z}"));
        out.push_str(&format!(
            "{i} {z} {:.12} {:.12} {:.12} {:.12}\n",
            v[0], v[1], v[2], v[3]
        ));
    }
    out.push_str(&format!("# selected {selected}\n"));
    out
}
