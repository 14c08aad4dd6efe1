//! Brute-force reference solver: dense nodal admittance matrix built straight
//! from the network description, solved by full Newton iteration with a
//! finite-difference Jacobian and partial-pivot Gaussian elimination.

#![allow(dead_code)]

use num_complex::Complex64 as C;
use protsim::netmodel::{LoadConnection, LoadModel, Network, Phase, WindingConnection};
use protsim::scenario::ScenarioSample;

pub const LEAK: f64 = 1e-6;

#[derive(Clone)]
pub struct Dense {
    pub n: usize,
    pub y: Vec<Vec<C>>,
    pub node_of: std::collections::HashMap<(usize, usize), usize>,
    pub base: Vec<f64>,
    pub source_i: Vec<C>,
    /// (node p, node q or none, consumed S at nominal, Vnom, model)
    pub loads: Vec<(usize, Option<usize>, C, f64, LoadModel)>,
    /// (node p, node q or none, generated S)
    pub gens: Vec<(usize, Option<usize>, C)>,
}

fn zero() -> C {
    C::new(0.0, 0.0)
}

pub fn solve_complex(a: &[Vec<C>], b: &[C]) -> Vec<C> {
    let n = b.len();
    let mut m: Vec<Vec<C>> = a.iter().zip(b).map(|(r, &x)| {
        let mut r = r.clone();
        r.push(x);
        r
    }).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].norm().total_cmp(&m[j][c].norm())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        assert!(piv.norm() > 0.0, "oracle matrix singular");
        for r in c + 1..n {
            let f = m[r][c] / piv;
            if f.norm() != 0.0 {
                for k in c..=n {
                    let v = m[c][k];
                    m[r][k] -= f * v;
                }
            }
        }
    }
    let mut x = vec![zero(); n];
    for r in (0..n).rev() {
        let mut acc = m[r][n];
        for k in r + 1..n {
            acc -= m[r][k] * x[k];
        }
        x[r] = acc / m[r][r];
    }
    x
}

fn solve_real(a: Vec<Vec<f64>>, b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.into_iter().zip(b).map(|(mut r, x)| {
        r.push(x);
        r
    }).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / piv;
            if f != 0.0 {
                for k in c..=n {
                    let v = m[c][k];
                    m[r][k] -= f * v;
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = m[r][n];
        for k in r + 1..n {
            acc -= m[r][k] * x[k];
        }
        x[r] = acc / m[r][r];
    }
    x
}

fn invert(m: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = m.len();
    let mut cols = vec![vec![zero(); n]; n];
    for j in 0..n {
        let mut e = vec![zero(); n];
        e[j] = C::new(1.0, 0.0);
        let x = solve_complex(m, &e);
        for i in 0..n {
            cols[i][j] = x[i];
        }
    }
    cols
}

fn energized(net: &Network, open: &[usize]) -> Vec<bool> {
    let n = net.buses.len();
    let mut on = vec![false; n];
    on[net.bus_index(&net.source.bus).unwrap()] = true;
    loop {
        let mut changed = false;
        let mut mark = |a: usize, b: usize| {
            if on[a] != on[b] {
                on[a] = true;
                on[b] = true;
                changed = true;
            }
        };
        for (i, l) in net.lines.iter().enumerate() {
            if l.closed && !open.contains(&i) {
                mark(net.bus_index(&l.from_bus).unwrap(), net.bus_index(&l.to_bus).unwrap());
            }
        }
        for t in &net.transformers {
            mark(net.bus_index(&t.windings[0].bus).unwrap(), net.bus_index(&t.windings[1].bus).unwrap());
        }
        if !changed {
            return on;
        }
    }
}

/// Zone label per bus: smallest bus index reachable over closed lines.
fn zones(net: &Network, open: &[usize]) -> Vec<usize> {
    let n = net.buses.len();
    let mut z: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for (i, l) in net.lines.iter().enumerate() {
            if l.closed && !open.contains(&i) {
                let (a, b) = (net.bus_index(&l.from_bus).unwrap(), net.bus_index(&l.to_bus).unwrap());
                let m = z[a].min(z[b]);
                if z[a] != m || z[b] != m {
                    z[a] = m;
                    z[b] = m;
                    changed = true;
                }
            }
        }
        if !changed {
            return z;
        }
    }
}

impl Dense {
    fn add_branch(&mut self, p: Option<usize>, q: Option<usize>, v: C) {
        if let Some(p) = p {
            self.y[p][p] += v;
        }
        if let Some(q) = q {
            self.y[q][q] += v;
        }
        if let (Some(p), Some(q)) = (p, q) {
            self.y[p][q] -= v;
            self.y[q][p] -= v;
        }
    }

    /// Builds the dense model. `frozen` converts every load to the admittance
    /// it shows at the given voltages (fault studies).
    pub fn build(net: &Network, sc: &ScenarioSample, open: &[usize]) -> Dense {
        let mut node_of = std::collections::HashMap::new();
        let mut base = Vec::new();
        for (b, bus) in net.buses.iter().enumerate() {
            for p in bus.phases.iter() {
                node_of.insert((b, p.index()), base.len());
                base.push(bus.base_kv * 1000.0 / 3f64.sqrt());
            }
        }
        let mut neutrals = std::collections::HashMap::new();
        for (t, tr) in net.transformers.iter().enumerate() {
            for (w, wd) in tr.windings.iter().enumerate() {
                if wd.connection == WindingConnection::Wye {
                    neutrals.insert((t, w), base.len());
                    base.push(1.0);
                }
            }
        }
        let n = base.len();
        let mut d = Dense {
            n,
            y: vec![vec![zero(); n]; n],
            node_of,
            base,
            source_i: vec![zero(); n],
            loads: Vec::new(),
            gens: Vec::new(),
        };
        let on = energized(net, open);
        // leak: dead buses, every transformer neutral, and in each ungrounded
        // zone the nodes of its root bus (source bus, else lowest winding bus)
        let zone = zones(net, open);
        let sb = net.bus_index(&net.source.bus).unwrap();
        let mut grounded_zone = std::collections::HashSet::new();
        if net.source.grounded {
            grounded_zone.insert(zone[sb]);
        }
        let mut roots: std::collections::HashMap<usize, usize> = [(zone[sb], sb)].into();
        for w in net.transformers.iter().flat_map(|t| &t.windings) {
            let b = net.bus_index(&w.bus).unwrap();
            if w.connection == WindingConnection::WyeGrounded {
                grounded_zone.insert(zone[b]);
            }
            let r = roots.entry(zone[b]).or_insert(b);
            if *r != sb && b < *r {
                *r = b;
            }
        }
        for (&(b, _), &i) in &d.node_of {
            if !on[b] || (!grounded_zone.contains(&zone[b]) && roots.get(&zone[b]) == Some(&b)) {
                d.y[i][i] += C::new(LEAK, 0.0);
            }
        }
        for &i in neutrals.values() {
            d.y[i][i] += C::new(LEAK, 0.0);
        }
        let node = |d: &Dense, b: usize, p: Phase| d.node_of[&(b, p.index())];
        for (i, l) in net.lines.iter().enumerate() {
            let f = net.bus_index(&l.from_bus).unwrap();
            let t = net.bus_index(&l.to_bus).unwrap();
            if !l.closed || open.contains(&i) || !on[f] {
                continue;
            }
            let code = net.linecode(&l.code).unwrap();
            let ph: Vec<Phase> = l.phases.iter().collect();
            let pos: Vec<usize> = if ph.len() == code.n_phases { (0..ph.len()).collect() } else { ph.iter().map(|p| p.index()).collect() };
            let z: Vec<Vec<C>> = pos
                .iter()
                .map(|&a| pos.iter().map(|&b| C::new(code.r_matrix[a * code.n_phases + b], code.x_matrix[a * code.n_phases + b]) * l.length_km).collect())
                .collect();
            let yz = invert(&z);
            for (a, &pa) in ph.iter().enumerate() {
                for (b, &pb) in ph.iter().enumerate() {
                    let (fa, fb, ta, tb) = (node(&d, f, pa), node(&d, f, pb), node(&d, t, pa), node(&d, t, pb));
                    d.y[fa][fb] += yz[a][b];
                    d.y[ta][tb] += yz[a][b];
                    d.y[fa][tb] -= yz[a][b];
                    d.y[ta][fb] -= yz[a][b];
                }
            }
        }
        for (ti, tr) in net.transformers.iter().enumerate() {
            let b0 = net.bus_index(&tr.windings[0].bus).unwrap();
            if !on[b0] {
                continue;
            }
            // each unit: series impedance on the secondary side of an ideal
            // transformer, expressed as coupled winding-voltage equations
            let mut terms: Vec<Vec<(Option<usize>, Option<usize>)>> = Vec::new();
            let mut volts = Vec::new();
            for (w, wd) in tr.windings.iter().enumerate() {
                let b = net.bus_index(&wd.bus).unwrap();
                let ph: Vec<Phase> = wd.phases.iter().collect();
                let t: Vec<(Option<usize>, Option<usize>)> = match wd.connection {
                    WindingConnection::Delta => {
                        if tr.units == 3 {
                            (0..3).map(|k| (Some(node(&d, b, ph[k])), Some(node(&d, b, ph[(k + 1) % 3])))).collect()
                        } else {
                            vec![(Some(node(&d, b, ph[0])), Some(node(&d, b, ph[1])))]
                        }
                    }
                    WindingConnection::WyeGrounded => ph.iter().map(|&p| (Some(node(&d, b, p)), None)).collect(),
                    WindingConnection::Wye => {
                        let nn = neutrals[&(ti, w)];
                        ph.iter().map(|&p| (Some(node(&d, b, p)), Some(nn))).collect()
                    }
                };
                terms.push(t);
                let unit_v = if tr.units == 3 && wd.connection != WindingConnection::Delta { wd.kv / 3f64.sqrt() } else { wd.kv };
                volts.push(unit_v);
            }
            let n_units = terms[0].len() as f64;
            let zb = volts[1] * volts[1] * 1000.0 / (tr.windings[0].kva / n_units);
            let y = 1.0 / (tr.series_impedance * zb);
            let ratio = (volts[0] * tr.windings[0].tap) / (volts[1] * tr.windings[1].tap);
            for u in 0..terms[0].len() {
                let ends = [terms[0][u], terms[1][u]];
                // I_w1 = y/r² V1 − y/r V2 ; I_w2 = −y/r V1 + y V2
                let k = [[y / (ratio * ratio), -y / ratio], [-y / ratio, y]];
                for i in 0..2 {
                    for j in 0..2 {
                        for (ri, si) in [(ends[i].0, 1.0), (ends[i].1, -1.0)] {
                            for (cj, sj) in [(ends[j].0, 1.0), (ends[j].1, -1.0)] {
                                if let (Some(r), Some(c)) = (ri, cj) {
                                    d.y[r][c] += k[i][j] * (si * sj);
                                }
                            }
                        }
                    }
                }
            }
        }
        // source: phase impedance matrix from sequence impedances
        let s = &net.source;
        let sb = net.bus_index(&s.bus).unwrap();
        let a = C::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let amat = [[C::new(1.0, 0.0); 3], [C::new(1.0, 0.0), a * a, a], [C::new(1.0, 0.0), a, a * a]];
        let y_seq = [if s.grounded { 1.0 / s.z0 } else { zero() }, 1.0 / s.z1, 1.0 / s.z1];
        // Yabc = A diag(y) A⁻¹ with A⁻¹ = conj(A)ᵀ / 3
        let mut ys = [[zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    ys[i][j] += amat[i][k] * y_seq[k] * amat[j][k].conj() / 3.0;
                }
            }
        }
        let vln = s.pu * s.nominal_kv * 1000.0 / 3f64.sqrt();
        let e: Vec<C> = (0..3).map(|k| C::from_polar(vln, (s.angle_deg - 120.0 * k as f64).to_radians())).collect();
        let sph: Vec<Phase> = net.buses[sb].phases.iter().collect();
        for &pi in &sph {
            for &pj in &sph {
                let (ni, nj) = (node(&d, sb, pi), node(&d, sb, pj));
                d.y[ni][nj] += ys[pi.index()][pj.index()];
                d.source_i[ni] += ys[pi.index()][pj.index()] * e[pj.index()];
            }
        }
        let branches = |d: &Dense, b: usize, phases: protsim::netmodel::PhaseSet, delta: bool| -> Vec<(usize, Option<usize>)> {
            let ph: Vec<Phase> = phases.iter().collect();
            if !delta {
                ph.iter().map(|&p| (node(d, b, p), None)).collect()
            } else if ph.len() == 3 {
                (0..3).map(|k| (node(d, b, ph[k]), Some(node(d, b, ph[(k + 1) % 3])))).collect()
            } else {
                vec![(node(d, b, ph[0]), Some(node(d, b, ph[1])))]
            }
        };
        for (li, l) in net.loads.iter().enumerate() {
            let b = net.bus_index(&l.bus).unwrap();
            if !on[b] {
                continue;
            }
            let delta = l.connection == LoadConnection::Delta;
            let br = branches(&d, b, l.phases, delta);
            let s = C::new(l.kw, l.kvar) * 1000.0 * sc.load_scale[li] / br.len() as f64;
            let vnom = if delta { net.buses[b].base_kv * 1000.0 } else { net.buses[b].base_kv * 1000.0 / 3f64.sqrt() };
            for (p, q) in br {
                if l.model == LoadModel::ConstantZ {
                    d.add_branch(Some(p), q, s.conj() / (vnom * vnom));
                } else {
                    d.loads.push((p, q, s, vnom, l.model));
                }
            }
        }
        for (gi, g) in net.ders.iter().enumerate() {
            let b = net.bus_index(&g.bus).unwrap();
            if !on[b] {
                continue;
            }
            let br = branches(&d, b, g.phases, g.connection == LoadConnection::Delta);
            let mag = g.rated_kva * 1000.0 * sc.der_scale[gi] / br.len() as f64;
            let s = C::new(g.pf, (1.0 - g.pf * g.pf).max(0.0).sqrt()) * mag;
            for (p, q) in br {
                d.gens.push((p, q, s));
            }
        }
        d
    }

    fn vb(v: &[C], p: usize, q: Option<usize>) -> C {
        v[p] - q.map_or(zero(), |q| v[q])
    }

    /// Net current leaving each node through Y minus all injections.
    pub fn residual(&self, v: &[C]) -> Vec<C> {
        let mut r: Vec<C> = (0..self.n).map(|i| (0..self.n).map(|j| self.y[i][j] * v[j]).sum::<C>() - self.source_i[i]).collect();
        for &(p, q, s, vnom, model) in &self.loads {
            let vb = Self::vb(v, p, q);
            let i = match model {
                LoadModel::ConstantPq => (s / vb).conj(),
                LoadModel::ConstantI => C::from_polar(s.norm() / vnom, vb.arg() - s.arg()),
                LoadModel::ConstantZ => unreachable!(),
            };
            r[p] += i;
            if let Some(q) = q {
                r[q] -= i;
            }
        }
        for &(p, q, s) in &self.gens {
            let i = (s / Self::vb(v, p, q)).conj();
            r[p] -= i;
            if let Some(q) = q {
                r[q] += i;
            }
        }
        r
    }

    /// Full Newton on the real and imaginary node voltage components.
    pub fn solve(&self) -> Vec<C> {
        let mut v = solve_complex(&self.y, &self.source_i);
        let n = self.n;
        for _ in 0..100 {
            let f = self.residual(&v);
            let mut jac = vec![vec![0.0; 2 * n]; 2 * n];
            for k in 0..2 * n {
                let h = 1e-7 * self.base[k / 2].max(1.0);
                let mut vp = v.clone();
                if k % 2 == 0 {
                    vp[k / 2] += C::new(h, 0.0);
                } else {
                    vp[k / 2] += C::new(0.0, h);
                }
                let fp = self.residual(&vp);
                for i in 0..n {
                    jac[2 * i][k] = (fp[i].re - f[i].re) / h;
                    jac[2 * i + 1][k] = (fp[i].im - f[i].im) / h;
                }
            }
            let rhs: Vec<f64> = f.iter().flat_map(|x| [-x.re, -x.im]).collect();
            let dx = solve_real(jac, rhs);
            let mut step = 0.0f64;
            for i in 0..n {
                v[i] += C::new(dx[2 * i], dx[2 * i + 1]);
                step = step.max(C::new(dx[2 * i], dx[2 * i + 1]).norm() / self.base[i]);
            }
            if step < 1e-12 {
                break;
            }
        }
        v
    }

    pub fn voltage_pu(&self, v: &[C], bus: usize, phase: Phase) -> Option<C> {
        self.node_of.get(&(bus, phase.index())).map(|&i| v[i] / self.base[i])
    }
}
