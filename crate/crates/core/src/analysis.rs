//! Singularity scanning of extension nodes and level matching between spectra.

use serde::{Deserialize, Serialize};

use crate::pipeline::ExtensionNode;
use crate::spectral::SpectrumResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleKind {
    NodeOfPsi,
    WeightZero,
    PotentialPole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleRecord {
    pub x: f64,
    pub kind: PoleKind,
    /// Strictly inside the grid interval.
    pub interior: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Regular,
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub poles: Vec<PoleRecord>,
    pub verdict: Verdict,
}

/// ψ of a node in its own coordinate: `ψ̃(αx)`.
fn node_psi(node: &ExtensionNode, x: f64) -> f64 {
    node.psi_xi.interpolate(node.alpha * x)
}

fn bisect(node: &ExtensionNode, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = node_psi(node, lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = node_psi(node, mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sign-change bracket around `p`, widened up to a few steps.
fn bracket(node: &ExtensionNode, p: f64) -> Option<(f64, f64)> {
    let h = node.grid.h();
    let (a, b) = (node.grid.a(), node.grid.b());
    for w in [0.5, 1.0, 2.0, 4.0] {
        let lo = (p - w * h).max(a);
        let hi = (p + w * h).min(b);
        if node_psi(node, lo) * node_psi(node, hi) < 0.0 {
            return Some((lo, hi));
        }
    }
    None
}

/// Index runs where `bad` holds, reported at their first point.
fn runs(bad: impl Iterator<Item = bool>) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = false;
    for (i, b) in bad.enumerate() {
        if b && !prev {
            out.push(i);
        }
        prev = b;
    }
    out
}

pub fn singularity_scan(node: &ExtensionNode) -> SingularityReport {
    let grid = node.grid;
    let (a, b) = (grid.a(), grid.b());
    let n = grid.n();
    let tol = 1e-8 * (b - a);
    let mut poles = Vec::new();

    for &p in node.f.poles() {
        let x = match (node.alpha != 0.0).then(|| bracket(node, p)).flatten() {
            Some((lo, hi)) => bisect(node, lo, hi, tol),
            None => p,
        };
        poles.push(PoleRecord {
            x,
            kind: PoleKind::NodeOfPsi,
            interior: x > a && x < b,
        });
    }

    let g = node.weight.g.values();
    for i in runs((0..n).map(|i| !(g[i] > 0.0))) {
        poles.push(PoleRecord {
            x: grid.x(i),
            kind: PoleKind::WeightZero,
            interior: i > 0 && i < n - 1,
        });
    }

    let (vp, vm) = (node.v_tilde_plus.values(), node.v_tilde_minus.values());
    for i in runs((0..n).map(|i| !vp[i].is_finite() || !vm[i].is_finite())) {
        poles.push(PoleRecord {
            x: grid.x(i),
            kind: PoleKind::PotentialPole,
            interior: i > 0 && i < n - 1,
        });
    }

    poles.sort_by(|p, q| p.x.total_cmp(&q.x));
    let verdict = if poles.iter().any(|p| p.interior) {
        Verdict::Singular
    } else {
        Verdict::Regular
    };
    SingularityReport { poles, verdict }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub drop_lowest_a: bool,
    pub allow_shift: bool,
    pub tol: f64,
}

impl MatchOptions {
    pub fn exact(tol: f64) -> Self {
        Self {
            drop_lowest_a: false,
            allow_shift: false,
            tol,
        }
    }

    pub fn shifted(drop_lowest_a: bool, tol: f64) -> Self {
        Self {
            drop_lowest_a,
            allow_shift: true,
            tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMatch {
    /// `(index_a, index_b, |b - (a + shift)|)`, ascending in `index_a`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
    /// Added to spectrum a before comparison.
    pub shift: f64,
}

impl SpectralMatch {
    pub fn total_gap(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).sum()
    }

    pub fn max_gap(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).fold(0.0, f64::max)
    }
}

/// Order-preserving matching of `a + shift` into `b` with every gap within
/// `tol`: most pairs first, then least total gap.
fn match_ordered(a: &[(usize, f64)], b: &[f64], shift: f64, tol: f64) -> Vec<(usize, usize, f64)> {
    let (m, n) = (a.len(), b.len());
    // best[i][j]: optimum over a[i..], b[j..].
    let mut best = vec![vec![(0usize, 0.0f64); n + 1]; m + 1];
    let better = |x: (usize, f64), y: (usize, f64)| x.0 > y.0 || (x.0 == y.0 && x.1 < y.1);
    for i in (0..m).rev() {
        for j in (0..n).rev() {
            let mut cand = best[i + 1][j];
            if better(best[i][j + 1], cand) {
                cand = best[i][j + 1];
            }
            let gap = (b[j] - (a[i].1 + shift)).abs();
            if gap <= tol {
                let take = (best[i + 1][j + 1].0 + 1, best[i + 1][j + 1].1 + gap);
                if better(take, cand) {
                    cand = take;
                }
            }
            best[i][j] = cand;
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < m && j < n {
        let gap = (b[j] - (a[i].1 + shift)).abs();
        if gap <= tol && best[i][j] == (best[i + 1][j + 1].0 + 1, best[i + 1][j + 1].1 + gap) {
            pairs.push((a[i].0, j, gap));
            i += 1;
            j += 1;
        } else if best[i][j] == best[i + 1][j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}

fn finish(a: &[(usize, f64)], b: &[f64], shift: f64, pairs: Vec<(usize, usize, f64)>) -> SpectralMatch {
    let unmatched_a = a
        .iter()
        .map(|p| p.0)
        .filter(|i| !pairs.iter().any(|p| p.0 == *i))
        .collect();
    let unmatched_b = (0..b.len()).filter(|j| !pairs.iter().any(|p| p.1 == *j)).collect();
    SpectralMatch {
        pairs,
        unmatched_a,
        unmatched_b,
        shift,
    }
}

/// Matches two ascending level lists, optionally after dropping the lowest
/// of `a` and after fitting a constant shift.
pub fn isospectral_compare(a: &[f64], b: &[f64], opts: &MatchOptions) -> SpectralMatch {
    let skip = usize::from(opts.drop_lowest_a && !a.is_empty());
    let a: Vec<(usize, f64)> = a.iter().copied().enumerate().skip(skip).collect();
    if !opts.allow_shift {
        let pairs = match_ordered(&a, b, 0.0, opts.tol);
        return finish(&a, b, 0.0, pairs);
    }
    let mut candidates = vec![0.0];
    for &(_, x) in &a {
        for &y in b {
            candidates.push(y - x);
        }
    }
    let mut best: Option<(f64, Vec<(usize, usize, f64)>)> = None;
    for s0 in candidates {
        let mut s = s0;
        let mut pairs = match_ordered(&a, b, s, opts.tol);
        for _ in 0..2 {
            if pairs.is_empty() {
                break;
            }
            let a_of = |i: usize| a.iter().find(|p| p.0 == i).expect("matched index").1;
            let refined = pairs.iter().map(|p| b[p.1] - a_of(p.0)).sum::<f64>() / pairs.len() as f64;
            let again = match_ordered(&a, b, refined, opts.tol);
            if again.len() < pairs.len() {
                break;
            }
            s = refined;
            pairs = again;
        }
        let total: f64 = pairs.iter().map(|p| p.2).sum();
        let replace = match &best {
            None => true,
            Some((_, bp)) => {
                let bt: f64 = bp.iter().map(|p| p.2).sum();
                pairs.len() > bp.len() || (pairs.len() == bp.len() && total < bt - 1e-15)
            }
        };
        if replace {
            best = Some((s, pairs));
        }
    }
    let (shift, pairs) = best.expect("candidate list is non-empty");
    finish(&a, b, shift, pairs)
}

/// [`isospectral_compare`] on solver output.
pub fn compare_spectra(a: &SpectrumResult, b: &SpectrumResult, opts: &MatchOptions) -> SpectralMatch {
    isospectral_compare(&a.eigenvalues, &b.eigenvalues, opts)
}
