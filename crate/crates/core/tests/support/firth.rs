/// Penalized log-likelihood from scratch: product-form likelihood and a
/// Gaussian-elimination determinant.
pub fn penalized_loglik(x: &[Vec<f64>], y: &[f64], beta: &[f64]) -> f64 {
    let p = beta.len();
    let mut info = vec![vec![0.0; p]; p];
    let mut ll = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        let pi = 1.0 / (1.0 + (-eta).exp());
        ll += if yi == 1.0 { pi.ln() } else { (1.0 - pi).ln() };
        let w = pi * (1.0 - pi);
        for a in 0..p {
            for b in 0..p {
                info[a][b] += w * row[a] * row[b];
            }
        }
    }
    ll + 0.5 * det(info).ln()
}

pub fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut d = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        if piv != c {
            m.swap(piv, c);
            d = -d;
        }
        d *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    d
}

/// Plain Nelder-Mead maximizer with restarts.
pub fn nelder_mead_max(f: impl Fn(&[f64]) -> f64, start: Vec<f64>) -> Vec<f64> {
    let p = start.len();
    let g = |v: &[f64]| {
        let r = -f(v);
        if r.is_nan() {
            f64::INFINITY
        } else {
            r
        }
    };
    let mut best = start;
    for _restart in 0..6 {
        let mut simplex = vec![best.clone()];
        for j in 0..p {
            let mut v = best.clone();
            v[j] += 0.5;
            simplex.push(v);
        }
        let mut vals: Vec<f64> = simplex.iter().map(|v| g(v)).collect();
        for _ in 0..20_000 {
            let mut idx: Vec<usize> = (0..=p).collect();
            idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            vals = idx.iter().map(|&i| vals[i]).collect();
            if (vals[p] - vals[0]).abs() < 1e-15 {
                break;
            }
            let centroid: Vec<f64> = (0..p).map(|j| simplex[..p].iter().map(|v| v[j]).sum::<f64>() / p as f64).collect();
            let along = |t: f64| -> Vec<f64> { (0..p).map(|j| centroid[j] + t * (simplex[p][j] - centroid[j])).collect() };
            let r = along(-1.0);
            let fr = g(&r);
            if fr < vals[0] {
                let e = along(-2.0);
                let fe = g(&e);
                if fe < fr {
                    simplex[p] = e;
                    vals[p] = fe;
                } else {
                    simplex[p] = r;
                    vals[p] = fr;
                }
            } else if fr < vals[p - 1] {
                simplex[p] = r;
                vals[p] = fr;
            } else {
                let c = if fr < vals[p] { along(-0.5) } else { along(0.5) };
                let fc = g(&c);
                if fc < vals[p].min(fr) {
                    simplex[p] = c;
                    vals[p] = fc;
                } else {
                    for i in 1..=p {
                        simplex[i] = (0..p).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                        vals[i] = g(&simplex[i]);
                    }
                }
            }
        }
        best = simplex[0].clone();
    }
    best
}
