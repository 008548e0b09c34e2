//! Centroid-linkage agglomerative clustering.
//!
//! Clusters are identified by their smallest member index. At each step the
//! pair with the smallest squared centroid distance merges, ties broken by
//! the pair's (smaller id, larger id). A centroid is the plain mean of its
//! members summed in ascending index order, so results do not depend on
//! merge history.
//!
//! The merge sequence does not depend on the cutoff, only where it stops, so
//! one [`MergeTrace`] built up to the largest cutoff of interest answers
//! every smaller cutoff by replaying a prefix.

use crate::geom::Point3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Surviving cluster id (the smaller of the two).
    pub into: usize,
    /// Absorbed cluster id.
    pub from: usize,
    /// Centroid distance at the time of the merge.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeTrace {
    n: usize,
    merges: Vec<Merge>,
}

pub(crate) fn centroid_of(points: &[Point3], members: &[usize]) -> Point3 {
    let mut s = [0.0; 3];
    for &i in members {
        s[0] += points[i].x;
        s[1] += points[i].y;
        s[2] += points[i].z;
    }
    let n = members.len() as f64;
    Point3::new(s[0] / n, s[1] / n, s[2] / n)
}

pub(crate) fn d2(a: &Point3, b: &Point3) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    dx * dx + dy * dy + dz * dz
}

/// `(d², smaller id, larger id)` ordering key for a candidate merge.
type Key = (f64, usize, usize);

fn key(d: f64, a: usize, b: usize) -> Key {
    (d, a.min(b), a.max(b))
}

fn less(a: &Key, b: &Key) -> bool {
    a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2))
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Runs agglomeration until the closest pair is at least `max_cutoff` apart.
pub fn agglomerate(points: &[Point3], max_cutoff: f64) -> MergeTrace {
    let n = points.len();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut centroids: Vec<Point3> = points.to_vec();
    let mut active: Vec<usize> = (0..n).collect();
    let mut alive = vec![true; n];
    // nearest other cluster of each active cluster
    let mut nn: Vec<Option<(Key, usize)>> = vec![None; n];

    let nearest = |c: usize, active: &[usize], centroids: &[Point3]| -> Option<(Key, usize)> {
        let mut best: Option<(Key, usize)> = None;
        for &o in active {
            if o == c {
                continue;
            }
            let k = key(d2(&centroids[c], &centroids[o]), c, o);
            if best.as_ref().is_none_or(|(bk, _)| less(&k, bk)) {
                best = Some((k, o));
            }
        }
        best
    };

    for &c in &active {
        nn[c] = nearest(c, &active, &centroids);
    }
    let mut merges = Vec::new();
    let limit = max_cutoff;
    while active.len() > 1 {
        let mut best: Option<(Key, usize)> = None;
        for &c in &active {
            if let Some((k, o)) = nn[c] {
                if best.as_ref().is_none_or(|(bk, _)| less(&k, bk)) {
                    best = Some((k, o));
                }
            }
        }
        let Some(((dd, a, b), _)) = best else { break };
        let distance = dd.sqrt();
        if distance >= limit {
            break;
        }
        merges.push(Merge {
            into: a,
            from: b,
            distance,
        });
        let merged = merge_sorted(&members[a], &members[b]);
        members[b].clear();
        centroids[a] = centroid_of(points, &merged);
        members[a] = merged;
        alive[b] = false;
        active.retain(|&c| c != b);
        nn[b] = None;

        nn[a] = nearest(a, &active, &centroids);
        for idx in 0..active.len() {
            let c = active[idx];
            if c == a {
                continue;
            }
            match nn[c] {
                Some((_, o)) if o == a || o == b => {
                    nn[c] = nearest(c, &active, &centroids);
                }
                Some((k, _)) => {
                    let cand = key(d2(&centroids[c], &centroids[a]), c, a);
                    if less(&cand, &k) {
                        nn[c] = Some((cand, a));
                    }
                }
                None => nn[c] = nearest(c, &active, &centroids),
            }
        }
    }
    debug_assert!(alive.iter().filter(|&&x| x).count() == active.len());
    MergeTrace { n, merges }
}

impl MergeTrace {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Clusters obtained when agglomeration stops at `cutoff`: member lists
    /// sorted ascending, clusters ordered by smallest member.
    pub fn cut(&self, cutoff: f64) -> Vec<Vec<usize>> {
        let mut members: Vec<Vec<usize>> = (0..self.n).map(|i| vec![i]).collect();
        for m in &self.merges {
            if m.distance >= cutoff {
                break;
            }
            let from = std::mem::take(&mut members[m.from]);
            members[m.into] = merge_sorted(&members[m.into], &from);
        }
        members.into_iter().filter(|m| !m.is_empty()).collect()
    }
}
