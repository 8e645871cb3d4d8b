//! Convex piecewise-linear functions of the cost `c` built as `Σ_p max_q ℓ_{p,q}(c)`.

use serde::{Deserialize, Serialize};

/// `slope · c + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AffineInCost {
    pub slope: f64,
    pub intercept: f64,
}

impl AffineInCost {
    pub fn new(slope: f64, intercept: f64) -> Self {
        AffineInCost { slope, intercept }
    }

    pub fn eval(&self, c: f64) -> f64 {
        self.slope * c + self.intercept
    }
}

impl std::ops::Add for AffineInCost {
    type Output = AffineInCost;

    fn add(self, rhs: Self) -> Self {
        AffineInCost { slope: self.slope + rhs.slope, intercept: self.intercept + rhs.intercept }
    }
}

/// Where two lines cross, `None` if parallel.
fn crossing(a: &AffineInCost, b: &AffineInCost) -> Option<f64> {
    if a.slope == b.slope {
        None
    } else {
        Some((b.intercept - a.intercept) / (a.slope - b.slope))
    }
}

/// Upper envelope of one family of lines over the whole real line.
#[derive(Debug, Clone, PartialEq)]
struct Envelope {
    /// Line indices in order of increasing slope, i.e. left to right.
    hull: Vec<usize>,
    /// `breaks[i]` separates `hull[i]` from `hull[i + 1]`.
    breaks: Vec<f64>,
}

impl Envelope {
    fn build(lines: &[AffineInCost]) -> Self {
        let mut order: Vec<usize> = (0..lines.len()).collect();
        // Increasing slope; among parallel lines the highest first, then lowest index.
        order.sort_by(|&a, &b| {
            lines[a]
                .slope
                .total_cmp(&lines[b].slope)
                .then(lines[b].intercept.total_cmp(&lines[a].intercept))
                .then(a.cmp(&b))
        });
        order.dedup_by(|b, a| lines[*a].slope == lines[*b].slope);

        let mut hull: Vec<usize> = Vec::with_capacity(order.len());
        for idx in order {
            while hull.len() >= 2 {
                let (l1, l2) = (&lines[hull[hull.len() - 2]], &lines[hull[hull.len() - 1]]);
                let x12 = crossing(l1, l2).expect("hull slopes are distinct");
                let x13 = crossing(l1, &lines[idx]).expect("hull slopes are distinct");
                if x13 <= x12 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(idx);
        }
        let breaks = hull
            .windows(2)
            .map(|w| crossing(&lines[w[0]], &lines[w[1]]).expect("hull slopes are distinct"))
            .collect();
        Envelope { hull, breaks }
    }
}

/// The function `c ↦ Σ_p max_q lines[p][q](c)`.
///
/// Each per-`p` maximum is convex, so the sum is convex and its slope is
/// non-decreasing from left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlInCost {
    lines: Vec<Vec<AffineInCost>>,
    envelopes: Vec<Envelope>,
    breakpoints: Vec<f64>,
}

impl PwlInCost {
    pub fn new(lines: Vec<Vec<AffineInCost>>) -> Self {
        let envelopes: Vec<Envelope> = lines.iter().map(|family| Envelope::build(family)).collect();
        let mut breakpoints: Vec<f64> = envelopes.iter().flat_map(|e| e.breaks.iter().copied()).collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        PwlInCost { lines, envelopes, breakpoints }
    }

    pub fn lines(&self) -> &[Vec<AffineInCost>] {
        &self.lines
    }

    /// Costs at which some per-price envelope changes its leading line.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// The maximizing `q` for `p` at `c`, lowest index on ties.
    pub fn leader(&self, p: usize, c: f64) -> usize {
        let family = &self.lines[p];
        let mut best = 0;
        let mut best_value = family[0].eval(c);
        for (q, line) in family.iter().enumerate().skip(1) {
            let v = line.eval(c);
            if v > best_value {
                best = q;
                best_value = v;
            }
        }
        best
    }

    /// Direct evaluation `Σ_p max_q ℓ_{p,q}(c)`.
    pub fn eval(&self, c: f64) -> f64 {
        self.lines
            .iter()
            .map(|family| family.iter().map(|l| l.eval(c)).fold(f64::NEG_INFINITY, f64::max))
            .filter(|v| v.is_finite())
            .sum()
    }

    /// Linear pieces `(from, to, line)` covering the real line left to right.
    pub fn pieces(&self) -> Vec<(f64, f64, AffineInCost)> {
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend(self.breakpoints.iter().copied());
        edges.push(f64::INFINITY);
        edges
            .windows(2)
            .map(|w| {
                let line = self
                    .envelopes
                    .iter()
                    .zip(&self.lines)
                    .filter(|(e, _)| !e.hull.is_empty())
                    .map(|(e, family)| {
                        // Number of this envelope's breaks at or left of the piece start.
                        let pos = e.breaks.partition_point(|&b| b <= w[0]);
                        family[e.hull[pos]]
                    })
                    .fold(AffineInCost::default(), |acc, l| acc + l);
                (w[0], w[1], line)
            })
            .collect()
    }

    /// Exact minimizer over `[lo, hi]` by enumerating the endpoints and every
    /// breakpoint inside; the smallest cost wins ties.
    pub fn minimize(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut candidates = vec![lo];
        candidates.extend(self.breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
        if hi > lo {
            candidates.push(hi);
        }
        let mut best = (lo, self.eval(lo));
        for &c in &candidates[1..] {
            let v = self.eval(c);
            if v < best.1 {
                best = (c, v);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: f64, i: f64) -> AffineInCost {
        AffineInCost::new(s, i)
    }

    #[test]
    fn envelope_drops_dominated_lines() {
        // y = -1 lies below max(-c, c) everywhere.
        let f = PwlInCost::new(vec![vec![l(-1.0, 0.0), l(0.0, -1.0), l(1.0, 0.0)]]);
        assert_eq!(f.breakpoints(), &[0.0]);
        assert_eq!(f.eval(-2.0), 2.0);
        assert_eq!(f.eval(3.0), 3.0);
        let pieces = f.pieces();
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces[0].2, l(-1.0, 0.0));
        assert_eq!(pieces[1].2, l(1.0, 0.0));
    }

    #[test]
    fn parallel_and_identical_lines() {
        let f = PwlInCost::new(vec![vec![l(1.0, 0.0), l(1.0, 0.5), l(1.0, 0.5)]]);
        assert!(f.breakpoints().is_empty());
        assert_eq!(f.leader(0, 0.0), 1);
        assert_eq!(f.eval(1.0), 1.5);
    }

    #[test]
    fn minimize_monotone_and_constant() {
        let dec = PwlInCost::new(vec![vec![l(-2.0, 1.0)]]);
        assert_eq!(dec.minimize(0.1, 0.9).0, 0.9);
        let flat = PwlInCost::new(vec![vec![l(0.0, 0.3), l(0.0, 0.2)]]);
        assert_eq!(flat.minimize(0.1, 0.9), (0.1, 0.3));
        let v = PwlInCost::new(vec![vec![l(-1.0, 0.5), l(1.0, -0.5)], vec![l(0.0, 0.0)]]);
        let (c, val) = v.minimize(0.0, 1.0);
        assert!((c - 0.5).abs() < 1e-15 && val.abs() < 1e-15);
        assert_eq!(v.minimize(0.7, 0.7), (0.7, v.eval(0.7)));
    }

    #[test]
    fn pieces_agree_with_direct_evaluation() {
        let f = PwlInCost::new(vec![
            vec![l(0.3, -0.2), l(-0.4, 0.1), l(0.0, 0.0), l(1.2, -0.9)],
            vec![l(-0.1, 0.05), l(0.5, -0.3)],
        ]);
        let pieces = f.pieces();
        let slopes: Vec<f64> = pieces.iter().map(|p| p.2.slope).collect();
        assert!(slopes.windows(2).all(|w| w[0] <= w[1]));
        for (from, to, line) in pieces {
            let mid = match (from.is_finite(), to.is_finite()) {
                (true, true) => 0.5 * (from + to),
                (false, true) => to - 1.0,
                (true, false) => from + 1.0,
                (false, false) => 0.0,
            };
            assert!((line.eval(mid) - f.eval(mid)).abs() < 1e-12);
        }
    }
}
