//! Maximum-weight matching in general graphs (Edmonds' blossom algorithm,
//! primal-dual form, `O(n^3)`).
//!
//! Structure follows Galil's presentation and the widely used reference
//! implementation by J. van Rantwijk. Weights are integers and every dual
//! variable stays integral: vertex duals are stored doubled, so the slack
//! of edge `(i, j)` is `dual[i] + dual[j] - 2 w(i, j)`.
//!
//! Edge endpoints are numbered `2k` and `2k + 1` for edge `k`; `mate[v]`
//! stores the remote endpoint of the matched edge at `v`.

const NONE: usize = usize::MAX;

pub type Weight = i64;

/// Final primal and dual state of a run.
#[derive(Clone, Debug)]
pub struct Matching {
    /// `mate[v]` is the vertex matched to `v`, if any.
    pub mate: Vec<Option<usize>>,
    /// Doubled vertex duals followed by blossom duals, indexed `0..2n`.
    pub dual: Vec<Weight>,
    /// Parent blossom of every vertex or blossom (`None` at top level).
    pub parent: Vec<Option<usize>>,
    /// Whether index `b >= n` is a live blossom.
    pub live_blossom: Vec<bool>,
}

impl Matching {
    pub fn vertex_count(&self) -> usize {
        self.mate.len()
    }

    pub fn is_perfect(&self) -> bool {
        self.mate.iter().all(Option::is_some)
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.mate
            .iter()
            .enumerate()
            .filter_map(|(v, m)| m.filter(|&w| v < w).map(|w| (v, w)))
            .collect()
    }

    /// Slack of a hypothetical edge `(i, j)` with weight `w` under the final
    /// duals, including the duals of blossoms containing both endpoints.
    /// Non-negative for every pair iff the duals certify the matching
    /// against that edge.
    pub fn reduced_slack(&self, i: usize, j: usize, w: Weight) -> Weight {
        let ci = self.chain(i);
        let cj = self.chain(j);
        let mut s = self.dual[i] + self.dual[j] - 2 * w;
        for (bi, bj) in ci.iter().zip(&cj) {
            if bi != bj {
                break;
            }
            s += 2 * self.dual[*bi];
        }
        s
    }

    /// Blossoms containing `v`, outermost first.
    fn chain(&self, mut v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        while let Some(p) = self.parent[v] {
            out.push(p);
            v = p;
        }
        out.reverse();
        out
    }

    /// All pairs `(i, j)`, `i < j`, accepted by `candidate` whose reduced
    /// slack under `weight` is negative.
    pub fn violations(
        &self,
        candidate: impl Fn(usize, usize) -> bool,
        weight: impl Fn(usize, usize) -> Weight,
    ) -> Vec<(usize, usize)> {
        let n = self.vertex_count();
        let chains: Vec<Vec<usize>> = (0..n).map(|v| self.chain(v)).collect();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if !candidate(i, j) {
                    continue;
                }
                // Blossom duals only add slack, so most pairs are settled
                // by the vertex duals alone.
                let base = self.dual[i] + self.dual[j] - 2 * weight(i, j);
                if base >= 0 {
                    continue;
                }
                let mut s = base;
                for (bi, bj) in chains[i].iter().zip(&chains[j]) {
                    if bi != bj {
                        break;
                    }
                    s += 2 * self.dual[*bi];
                }
                if s < 0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

struct State<'a> {
    n: usize,
    edges: &'a [(usize, usize, Weight)],
    endpoint: Vec<usize>,
    neighbend: Vec<Vec<usize>>,
    mate: Vec<usize>,
    label: Vec<u8>,
    labelend: Vec<usize>,
    inblossom: Vec<usize>,
    blossomparent: Vec<usize>,
    blossomchilds: Vec<Vec<usize>>,
    blossombase: Vec<usize>,
    blossomendps: Vec<Vec<usize>>,
    bestedge: Vec<usize>,
    blossombestedges: Vec<Option<Vec<usize>>>,
    unusedblossoms: Vec<usize>,
    dualvar: Vec<Weight>,
    allowedge: Vec<bool>,
    queue: Vec<usize>,
}

impl<'a> State<'a> {
    fn new(n: usize, edges: &'a [(usize, usize, Weight)]) -> Self {
        let maxweight = edges.iter().map(|e| e.2).max().unwrap_or(0).max(0);
        let mut endpoint = Vec::with_capacity(2 * edges.len());
        let mut neighbend = vec![Vec::new(); n];
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            endpoint.push(i);
            endpoint.push(j);
            neighbend[i].push(2 * k + 1);
            neighbend[j].push(2 * k);
        }
        let mut blossombase: Vec<usize> = (0..n).collect();
        blossombase.extend(std::iter::repeat_n(NONE, n));
        let mut dualvar = vec![maxweight; n];
        dualvar.extend(std::iter::repeat_n(0, n));
        Self {
            n,
            edges,
            endpoint,
            neighbend,
            mate: vec![NONE; n],
            label: vec![0; 2 * n],
            labelend: vec![NONE; 2 * n],
            inblossom: (0..n).collect(),
            blossomparent: vec![NONE; 2 * n],
            blossomchilds: vec![Vec::new(); 2 * n],
            blossombase,
            blossomendps: vec![Vec::new(); 2 * n],
            bestedge: vec![NONE; 2 * n],
            blossombestedges: vec![None; 2 * n],
            unusedblossoms: (n..2 * n).rev().collect(),
            dualvar,
            allowedge: vec![false; edges.len()],
            queue: Vec::new(),
        }
    }

    #[inline]
    fn slack(&self, k: usize) -> Weight {
        let (i, j, w) = self.edges[k];
        self.dualvar[i] + self.dualvar[j] - 2 * w
    }

    fn leaves(&self, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(b, &mut out);
        out
    }

    fn collect_leaves(&self, b: usize, out: &mut Vec<usize>) {
        if b < self.n {
            out.push(b);
        } else {
            for &t in &self.blossomchilds[b] {
                self.collect_leaves(t, out);
            }
        }
    }

    /// Labels the top-level blossom containing `w` with `t` (1 = S, 2 = T),
    /// reached through endpoint `p`.
    fn assign_label(&mut self, w: usize, t: u8, p: usize) {
        let b = self.inblossom[w];
        debug_assert!(self.label[w] == 0 && self.label[b] == 0);
        self.label[w] = t;
        self.label[b] = t;
        self.labelend[w] = p;
        self.labelend[b] = p;
        self.bestedge[w] = NONE;
        self.bestedge[b] = NONE;
        if t == 1 {
            let leaves = self.leaves(b);
            self.queue.extend(leaves);
        } else {
            let base = self.blossombase[b];
            debug_assert!(self.mate[base] != NONE);
            let mb = self.mate[base];
            self.assign_label(self.endpoint[mb], 1, mb ^ 1);
        }
    }

    /// Traces back from `v` and `w` to find a new blossom base, or `NONE`
    /// if the two trees are disjoint (an augmenting path exists).
    fn scan_blossom(&mut self, mut v: usize, mut w: usize) -> usize {
        let mut path = Vec::new();
        let mut base = NONE;
        while v != NONE || w != NONE {
            let mut b = self.inblossom[v];
            if self.label[b] & 4 != 0 {
                base = self.blossombase[b];
                break;
            }
            debug_assert_eq!(self.label[b], 1);
            path.push(b);
            self.label[b] = 5;
            if self.labelend[b] == NONE {
                v = NONE;
            } else {
                v = self.endpoint[self.labelend[b]];
                b = self.inblossom[v];
                debug_assert_eq!(self.label[b], 2);
                v = self.endpoint[self.labelend[b]];
            }
            if w != NONE {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b] = 1;
        }
        base
    }

    fn add_blossom(&mut self, base: usize, k: usize) {
        let (mut v, mut w, _) = self.edges[k];
        let bb = self.inblossom[base];
        let mut bv = self.inblossom[v];
        let mut bw = self.inblossom[w];
        let b = self.unusedblossoms.pop().expect("blossom slot available");
        self.blossombase[b] = base;
        self.blossomparent[b] = NONE;
        self.blossomparent[bb] = b;
        let mut path = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.blossomparent[bv] = b;
            path.push(bv);
            endps.push(self.labelend[bv]);
            v = self.endpoint[self.labelend[bv]];
            bv = self.inblossom[v];
        }
        path.push(bb);
        path.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossomparent[bw] = b;
            path.push(bw);
            endps.push(self.labelend[bw] ^ 1);
            w = self.endpoint[self.labelend[bw]];
            bw = self.inblossom[w];
        }
        debug_assert_eq!(self.label[bb], 1);
        self.label[b] = 1;
        self.labelend[b] = self.labelend[bb];
        self.dualvar[b] = 0;
        for leaf in self.leaves_of(&path) {
            if self.label[self.inblossom[leaf]] == 2 {
                self.queue.push(leaf);
            }
            self.inblossom[leaf] = b;
        }

        let mut bestedgeto = vec![NONE; 2 * self.n];
        for &sub in &path {
            let lists: Vec<Vec<usize>> = match self.blossombestedges[sub].take() {
                Some(list) => vec![list],
                None => self
                    .leaves(sub)
                    .into_iter()
                    .map(|leaf| self.neighbend[leaf].iter().map(|p| p / 2).collect())
                    .collect(),
            };
            for list in lists {
                for kk in list {
                    let (mut i, mut j, _) = self.edges[kk];
                    if self.inblossom[j] == b {
                        std::mem::swap(&mut i, &mut j);
                    }
                    let _ = i;
                    let bj = self.inblossom[j];
                    if bj != b
                        && self.label[bj] == 1
                        && (bestedgeto[bj] == NONE || self.slack(kk) < self.slack(bestedgeto[bj]))
                    {
                        bestedgeto[bj] = kk;
                    }
                }
            }
            self.bestedge[sub] = NONE;
        }
        let best: Vec<usize> = bestedgeto.into_iter().filter(|&kk| kk != NONE).collect();
        self.bestedge[b] = NONE;
        for &kk in &best {
            if self.bestedge[b] == NONE || self.slack(kk) < self.slack(self.bestedge[b]) {
                self.bestedge[b] = kk;
            }
        }
        self.blossombestedges[b] = Some(best);
        self.blossomchilds[b] = path;
        self.blossomendps[b] = endps;
    }

    fn leaves_of(&self, subs: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        for &s in subs {
            self.collect_leaves(s, &mut out);
        }
        out
    }

    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        let childs = self.blossomchilds[b].clone();
        for &s in &childs {
            self.blossomparent[s] = NONE;
            if s < self.n {
                self.inblossom[s] = s;
            } else if endstage && self.dualvar[s] == 0 {
                self.expand_blossom(s, endstage);
            } else {
                for leaf in self.leaves(s) {
                    self.inblossom[leaf] = s;
                }
            }
        }
        if !endstage && self.label[b] == 2 {
            // Relabel the part of the blossom on the alternating path.
            let entrychild = self.inblossom[self.endpoint[self.labelend[b] ^ 1]];
            let len = childs.len() as isize;
            let mut j = childs.iter().position(|&c| c == entrychild).expect("entry child") as isize;
            let (jstep, endptrick): (isize, usize) = if j & 1 == 1 {
                j -= len;
                (1, 0)
            } else {
                (-1, 1)
            };
            let at = |v: &Vec<usize>, idx: isize| v[idx.rem_euclid(len) as usize];
            let endps = self.blossomendps[b].clone();
            let mut p = self.labelend[b];
            while j != 0 {
                let q = at(&endps, j - endptrick as isize) ^ endptrick ^ 1;
                self.label[self.endpoint[p ^ 1]] = 0;
                self.label[self.endpoint[q]] = 0;
                self.assign_label(self.endpoint[p ^ 1], 2, p);
                self.allowedge[at(&endps, j - endptrick as isize) / 2] = true;
                j += jstep;
                p = at(&endps, j - endptrick as isize) ^ endptrick;
                self.allowedge[p / 2] = true;
                j += jstep;
            }
            let bv = at(&childs, j);
            self.label[self.endpoint[p ^ 1]] = 2;
            self.label[bv] = 2;
            self.labelend[self.endpoint[p ^ 1]] = p;
            self.labelend[bv] = p;
            self.bestedge[bv] = NONE;
            j += jstep;
            while at(&childs, j) != entrychild {
                let bv = at(&childs, j);
                if self.label[bv] == 1 {
                    j += jstep;
                    continue;
                }
                let labelled = self.leaves(bv).into_iter().find(|&v| self.label[v] != 0);
                if let Some(v) = labelled {
                    debug_assert_eq!(self.label[v], 2);
                    debug_assert_eq!(self.inblossom[v], bv);
                    self.label[v] = 0;
                    let mb = self.mate[self.blossombase[bv]];
                    self.label[self.endpoint[mb]] = 0;
                    self.assign_label(v, 2, self.labelend[v]);
                }
                j += jstep;
            }
        }
        self.label[b] = 0;
        self.labelend[b] = NONE;
        self.blossomchilds[b].clear();
        self.blossomendps[b].clear();
        self.blossombase[b] = NONE;
        self.blossombestedges[b] = None;
        self.bestedge[b] = NONE;
        self.unusedblossoms.push(b);
    }

    /// Swaps matched and unmatched edges along the even path from vertex `v`
    /// to the base of blossom `b`, making `v` the new base.
    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossomparent[t] != b {
            t = self.blossomparent[t];
        }
        if t >= self.n {
            self.augment_blossom(t, v);
        }
        let len = self.blossomchilds[b].len() as isize;
        let i = self.blossomchilds[b].iter().position(|&c| c == t).expect("child in blossom");
        let mut j = i as isize;
        let (jstep, endptrick): (isize, usize) = if i & 1 == 1 {
            j -= len;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t = self.blossomchilds[b][j.rem_euclid(len) as usize];
            let p = self.blossomendps[b][(j - endptrick as isize).rem_euclid(len) as usize] ^ endptrick;
            if t >= self.n {
                self.augment_blossom(t, self.endpoint[p]);
            }
            j += jstep;
            let t = self.blossomchilds[b][j.rem_euclid(len) as usize];
            if t >= self.n {
                self.augment_blossom(t, self.endpoint[p ^ 1]);
            }
            self.mate[self.endpoint[p]] = p ^ 1;
            self.mate[self.endpoint[p ^ 1]] = p;
        }
        self.blossomchilds[b].rotate_left(i);
        self.blossomendps[b].rotate_left(i);
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]];
        debug_assert_eq!(self.blossombase[b], v);
    }

    fn augment_matching(&mut self, k: usize) {
        let (v, w, _) = self.edges[k];
        for (mut s, mut p) in [(v, 2 * k + 1), (w, 2 * k)] {
            loop {
                let bs = self.inblossom[s];
                debug_assert_eq!(self.label[bs], 1);
                if bs >= self.n {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.labelend[bs] == NONE {
                    break;
                }
                let t = self.endpoint[self.labelend[bs]];
                let bt = self.inblossom[t];
                debug_assert_eq!(self.label[bt], 2);
                s = self.endpoint[self.labelend[bt]];
                let j = self.endpoint[self.labelend[bt] ^ 1];
                debug_assert_eq!(self.blossombase[bt], t);
                if bt >= self.n {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.labelend[bt];
                p = self.labelend[bt] ^ 1;
            }
        }
    }

    fn run(&mut self, max_cardinality: bool) {
        let n = self.n;
        for _stage in 0..n {
            self.label.fill(0);
            self.bestedge.fill(NONE);
            for b in n..2 * n {
                self.blossombestedges[b] = None;
            }
            self.allowedge.fill(false);
            self.queue.clear();
            for v in 0..n {
                if self.mate[v] == NONE && self.label[self.inblossom[v]] == 0 {
                    self.assign_label(v, 1, NONE);
                }
            }

            let mut augmented = false;
            loop {
                while let Some(v) = self.queue.pop() {
                    debug_assert_eq!(self.label[self.inblossom[v]], 1);
                    let mut idx = 0;
                    while idx < self.neighbend[v].len() {
                        let p = self.neighbend[v][idx];
                        idx += 1;
                        let k = p / 2;
                        let w = self.endpoint[p];
                        if self.inblossom[v] == self.inblossom[w] {
                            continue;
                        }
                        let mut kslack = 0;
                        if !self.allowedge[k] {
                            kslack = self.slack(k);
                            if kslack <= 0 {
                                self.allowedge[k] = true;
                            }
                        }
                        if self.allowedge[k] {
                            if self.label[self.inblossom[w]] == 0 {
                                self.assign_label(w, 2, p ^ 1);
                            } else if self.label[self.inblossom[w]] == 1 {
                                let base = self.scan_blossom(v, w);
                                if base != NONE {
                                    self.add_blossom(base, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w] == 0 {
                                debug_assert_eq!(self.label[self.inblossom[w]], 2);
                                self.label[w] = 2;
                                self.labelend[w] = p ^ 1;
                            }
                        } else if self.label[self.inblossom[w]] == 1 {
                            let b = self.inblossom[v];
                            if self.bestedge[b] == NONE || kslack < self.slack(self.bestedge[b]) {
                                self.bestedge[b] = k;
                            }
                        } else if self.label[w] == 0
                            && (self.bestedge[w] == NONE || kslack < self.slack(self.bestedge[w]))
                        {
                            self.bestedge[w] = k;
                        }
                    }
                    if augmented {
                        break;
                    }
                }
                if augmented {
                    break;
                }

                // No augmenting path with the current duals: pick the
                // largest dual change that keeps every constraint feasible.
                let mut deltatype = 0u8;
                let mut delta: Weight = 0;
                let mut deltaedge = NONE;
                let mut deltablossom = NONE;
                if !max_cardinality {
                    deltatype = 1;
                    delta = *self.dualvar[..n].iter().min().expect("non-empty");
                }
                for v in 0..n {
                    if self.label[self.inblossom[v]] == 0 && self.bestedge[v] != NONE {
                        let d = self.slack(self.bestedge[v]);
                        if deltatype == 0 || d < delta {
                            delta = d;
                            deltatype = 2;
                            deltaedge = self.bestedge[v];
                        }
                    }
                }
                for b in 0..2 * n {
                    if self.blossomparent[b] == NONE && self.label[b] == 1 && self.bestedge[b] != NONE {
                        let kslack = self.slack(self.bestedge[b]);
                        debug_assert_eq!(kslack % 2, 0);
                        let d = kslack / 2;
                        if deltatype == 0 || d < delta {
                            delta = d;
                            deltatype = 3;
                            deltaedge = self.bestedge[b];
                        }
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != NONE
                        && self.blossomparent[b] == NONE
                        && self.label[b] == 2
                        && (deltatype == 0 || self.dualvar[b] < delta)
                    {
                        delta = self.dualvar[b];
                        deltatype = 4;
                        deltablossom = b;
                    }
                }
                if deltatype == 0 {
                    // Maximum cardinality reached; finish with a final
                    // dual adjustment.
                    deltatype = 1;
                    delta = (*self.dualvar[..n].iter().min().expect("non-empty")).max(0);
                }

                for v in 0..n {
                    match self.label[self.inblossom[v]] {
                        1 => self.dualvar[v] -= delta,
                        2 => self.dualvar[v] += delta,
                        _ => {}
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != NONE && self.blossomparent[b] == NONE {
                        match self.label[b] {
                            1 => self.dualvar[b] += delta,
                            2 => self.dualvar[b] -= delta,
                            _ => {}
                        }
                    }
                }

                match deltatype {
                    1 => break,
                    2 => {
                        self.allowedge[deltaedge] = true;
                        let (mut i, j, _) = self.edges[deltaedge];
                        if self.label[self.inblossom[i]] == 0 {
                            i = j;
                        }
                        debug_assert_eq!(self.label[self.inblossom[i]], 1);
                        self.queue.push(i);
                    }
                    3 => {
                        self.allowedge[deltaedge] = true;
                        let (i, _, _) = self.edges[deltaedge];
                        debug_assert_eq!(self.label[self.inblossom[i]], 1);
                        self.queue.push(i);
                    }
                    _ => self.expand_blossom(deltablossom, false),
                }
            }

            if !augmented {
                break;
            }
            for b in n..2 * n {
                if self.blossomparent[b] == NONE
                    && self.blossombase[b] != NONE
                    && self.label[b] == 1
                    && self.dualvar[b] == 0
                {
                    self.expand_blossom(b, true);
                }
            }
        }
    }

    fn into_matching(self) -> Matching {
        let n = self.n;
        let mate = self
            .mate
            .iter()
            .map(|&p| (p != NONE).then(|| self.endpoint[p]))
            .collect();
        let parent = self.blossomparent.iter().map(|&p| (p != NONE).then_some(p)).collect();
        let live_blossom = (0..2 * n).map(|b| b >= n && self.blossombase[b] != NONE).collect();
        Matching { mate, dual: self.dualvar, parent, live_blossom }
    }
}

/// Maximum-weight matching of the graph on vertices `0..n` with the given
/// weighted edges (no self loops, at most one edge per pair). With
/// `max_cardinality`, only maximum-cardinality matchings are considered.
pub fn max_weight_matching(n: usize, edges: &[(usize, usize, Weight)], max_cardinality: bool) -> Matching {
    for &(i, j, _) in edges {
        assert!(i < n && j < n && i != j, "invalid edge ({i}, {j}) for {n} vertices");
    }
    let mut state = State::new(n, edges);
    if !edges.is_empty() {
        state.run(max_cardinality);
    }
    state.into_matching()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weight_of(m: &Matching, edges: &[(usize, usize, Weight)]) -> Weight {
        m.pairs()
            .iter()
            .map(|&(a, b)| {
                edges
                    .iter()
                    .find(|e| (e.0 == a && e.1 == b) || (e.0 == b && e.1 == a))
                    .expect("matched pair is an edge")
                    .2
            })
            .sum()
    }

    /// Best weight over all matchings (not necessarily perfect), exhaustive.
    fn brute_force(edges: &[(usize, usize, Weight)], used: &mut [bool], start: usize) -> Weight {
        let mut best = 0;
        for (k, &(i, j, w)) in edges.iter().enumerate().skip(start) {
            if !used[i] && !used[j] {
                used[i] = true;
                used[j] = true;
                best = best.max(w + brute_force(edges, used, k + 1));
                used[i] = false;
                used[j] = false;
            }
        }
        best
    }

    fn check_certificate(m: &Matching, edges: &[(usize, usize, Weight)]) {
        for &(i, j, w) in edges {
            let s = m.reduced_slack(i, j, w);
            assert!(s >= 0, "negative slack on ({i},{j})");
            if m.mate[i] == Some(j) {
                assert_eq!(s, 0, "matched edge ({i},{j}) not tight");
            }
        }
        for b in 0..m.dual.len() {
            if m.live_blossom[b] {
                assert!(m.dual[b] >= 0);
            }
        }
    }

    #[test]
    fn small_known_cases() {
        assert!(max_weight_matching(0, &[], false).mate.is_empty());
        let m = max_weight_matching(2, &[(0, 1, 1)], false);
        assert_eq!(m.pairs(), vec![(0, 1)]);
        let edges = [(0, 1, 10), (1, 2, 11)];
        assert_eq!(max_weight_matching(3, &edges, false).pairs(), vec![(1, 2)]);
        let edges = [(0, 1, 5), (1, 2, 11), (2, 3, 5)];
        assert_eq!(max_weight_matching(4, &edges, false).pairs(), vec![(1, 2)]);
        assert_eq!(max_weight_matching(4, &edges, true).pairs(), vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn blossom_cases_from_reference_suite() {
        // S-blossom then augment.
        let edges = [(0, 1, 8), (0, 2, 9), (1, 2, 10), (2, 3, 7)];
        let m = max_weight_matching(4, &edges, false);
        assert_eq!(m.pairs(), vec![(0, 1), (2, 3)]);
        // Nested S-blossom, relabel as T.
        let edges = [(0, 1, 9), (0, 2, 9), (1, 2, 10), (1, 3, 8), (2, 4, 8), (3, 4, 10), (4, 5, 6)];
        let m = max_weight_matching(6, &edges, false);
        assert_eq!(m.pairs(), vec![(0, 2), (1, 3), (4, 5)]);
        // Create S-blossom, relabel as T, expand.
        let edges = [(0, 1, 23), (0, 4, 22), (0, 5, 15), (1, 2, 25), (2, 3, 22), (3, 4, 25), (3, 7, 14), (4, 6, 13)];
        let m = max_weight_matching(8, &edges, false);
        assert_eq!(m.pairs(), vec![(0, 5), (1, 2), (3, 7), (4, 6)]);
        // Nasty expansion with nested blossoms.
        let edges = [
            (0, 1, 45), (0, 6, 45), (1, 2, 50), (2, 3, 45), (3, 4, 50), (0, 4, 30),
            (2, 8, 35), (3, 7, 35), (4, 5, 26), (8, 9, 5),
        ];
        let m = max_weight_matching(10, &edges, false);
        assert_eq!(m.pairs(), vec![(0, 6), (1, 2), (3, 7), (4, 5), (8, 9)]);
    }

    #[test]
    fn random_graphs_match_brute_force_and_certify() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for trial in 0..400 {
            let n = rng.random_range(2..=9);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(0.6) {
                        edges.push((i, j, rng.random_range(1..30)));
                    }
                }
            }
            let m = max_weight_matching(n, &edges, false);
            let best = brute_force(&edges, &mut vec![false; n], 0);
            assert_eq!(weight_of(&m, &edges), best, "trial {trial}");
            check_certificate(&m, &edges);
        }
    }
}
