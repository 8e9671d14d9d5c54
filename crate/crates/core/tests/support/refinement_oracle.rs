//! Naive f64 recomputation of the refinement flows, shared by the oracle
//! tests.
#![allow(dead_code)]

use slz_core::raster::Raster;
use slz_core::refinement::{Conv2d, ConvGru, ProjectionHead, RefinementState, RefinementWeights};

#[derive(Clone)]
pub struct Img {
    w: usize,
    h: usize,
    c: usize,
    v: Vec<f64>,
}

impl Img {
    pub fn from(r: &Raster) -> Self {
        Img {
            w: r.width(),
            h: r.height(),
            c: r.channels(),
            v: r.data().iter().map(|&x| x as f64).collect(),
        }
    }

    fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.v[(y * self.w + x) * self.c + c]
    }

    fn stack(parts: &[&Img]) -> Img {
        let (w, h) = (parts[0].w, parts[0].h);
        let c: usize = parts.iter().map(|p| p.c).sum();
        let mut v = Vec::with_capacity(w * h * c);
        for y in 0..h {
            for x in 0..w {
                for p in parts {
                    for k in 0..p.c {
                        v.push(p.at(x, y, k));
                    }
                }
            }
        }
        Img { w, h, c, v }
    }

    fn zip(&self, o: &Img, f: impl Fn(f64, f64) -> f64) -> Img {
        Img {
            v: self.v.iter().zip(&o.v).map(|(&a, &b)| f(a, b)).collect(),
            ..self.clone()
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Img {
        Img {
            v: self.v.iter().map(|&a| f(a)).collect(),
            ..self.clone()
        }
    }

    pub fn max_diff(&self, r: &Raster) -> f64 {
        assert_eq!(
            (self.w, self.h, self.c),
            (r.width(), r.height(), r.channels())
        );
        self.v
            .iter()
            .zip(r.data())
            .map(|(&a, &b)| (a - b as f64).abs())
            .fold(0.0, f64::max)
    }
}

// Kernel layout: tap (kx, ky), channel `o * in + i`.
fn conv(c: &Conv2d, x: &Img) -> Img {
    let k = c.kernel();
    let (kin, kout) = (c.in_channels(), c.out_channels());
    assert_eq!(x.c, kin);
    let r = (k.width() / 2) as i64;
    let mut v = vec![0.0; x.w * x.h * kout];
    for y in 0..x.h as i64 {
        for xx in 0..x.w as i64 {
            for o in 0..kout {
                let mut s = c.bias().data()[o] as f64;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (sx, sy) = (xx + dx, y + dy);
                        if sx < 0 || sy < 0 || sx >= x.w as i64 || sy >= x.h as i64 {
                            continue;
                        }
                        for i in 0..kin {
                            let wgt =
                                k.get((dx + r) as usize, (dy + r) as usize, o * kin + i) as f64;
                            s += wgt * x.at(sx as usize, sy as usize, i);
                        }
                    }
                }
                v[(y as usize * x.w + xx as usize) * kout + o] = s;
            }
        }
    }
    Img {
        w: x.w,
        h: x.h,
        c: kout,
        v,
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn gru(g: &ConvGru, h: &Img, x: &Img) -> Img {
    let hx = Img::stack(&[h, x]);
    let z = conv(&g.update, &hx).map(sigmoid);
    let r = conv(&g.reset, &hx).map(sigmoid);
    let q = conv(&g.candidate, &Img::stack(&[&r.zip(h, |a, b| a * b), x])).map(f64::tanh);
    let keep = z.zip(h, |z, h| (1.0 - z) * h);
    keep.zip(&z.zip(&q, |z, q| z * q), |a, b| a + b)
}

fn head(p: &ProjectionHead, h: &Img) -> Img {
    conv(&p.conv2, &conv(&p.conv1, h).map(|v| v.max(0.0)))
}

// Half-pixel-centre bilinear sampling with border clamping.
fn bilinear(s: &Img, w: usize, h: usize) -> Img {
    let mut v = Vec::with_capacity(w * h * s.c);
    let coord = |i: usize, src: usize, dst: usize| {
        let f = ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
        let lo = f.floor() as usize;
        (lo, (lo + 1).min(src - 1), f - lo as f64)
    };
    for y in 0..h {
        let (y0, y1, ty) = coord(y, s.h, h);
        for x in 0..w {
            let (x0, x1, tx) = coord(x, s.w, w);
            for c in 0..s.c {
                let a = s.at(x0, y0, c) + tx * (s.at(x1, y0, c) - s.at(x0, y0, c));
                let b = s.at(x0, y1, c) + tx * (s.at(x1, y1, c) - s.at(x0, y1, c));
                v.push(a + ty * (b - a));
            }
        }
    }
    Img { w, h, c: s.c, v }
}

fn nearest(s: &Img, w: usize, h: usize) -> Img {
    let mut v = Vec::with_capacity(w * h * s.c);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = ((x * s.w) / w, (y * s.h) / h);
            v.extend((0..s.c).map(|c| s.at(sx, sy, c)));
        }
    }
    Img { w, h, c: s.c, v }
}

pub struct OracleState {
    pub h4: Img,
    pub h7: Img,
    pub h14: Img,
    pub hs: Img,
    pub d: Img,
    pub n: Img,
    pub l: Img,
}

pub fn oracle_step(s: &OracleState, w: &RefinementWeights) -> OracleState {
    let x = Img::stack(&[&s.d, &s.n]);
    let h14 = gru(&w.gru_fourteenth, &s.h14, &bilinear(&x, s.h14.w, s.h14.h));
    let up14 = nearest(&h14, s.h7.w, s.h7.h);
    let h7 = gru(
        &w.gru_seventh,
        &s.h7,
        &Img::stack(&[&bilinear(&x, s.h7.w, s.h7.h), &up14]),
    );
    let up7 = nearest(&h7, s.h4.w, s.h4.h);
    let h4 = gru(&w.gru_quarter, &s.h4, &Img::stack(&[&x, &up7]));
    let d = s.d.zip(&head(&w.proj_depth, &h4), |a, b| a + b);
    let n = s.n.zip(&head(&w.proj_normal, &h4), |a, b| a + b);
    let hs = gru(&w.slz_gru, &s.hs, &Img::stack(&[&d, &n, &s.l]));
    let l = s.l.zip(&head(&w.proj_slz, &hs), |a, b| a + b);
    OracleState {
        h4,
        h7,
        h14,
        hs,
        d,
        n,
        l,
    }
}

impl OracleState {
    pub fn from_state(s: &RefinementState) -> Self {
        OracleState {
            h4: Img::from(&s.hidden.quarter),
            h7: Img::from(&s.hidden.seventh),
            h14: Img::from(&s.hidden.fourteenth),
            hs: Img::from(&s.slz_hidden),
            d: Img::from(&s.depth),
            n: Img::from(&s.normal),
            l: Img::from(&s.logits),
        }
    }

    /// Largest absolute difference over every tensor of `s`.
    pub fn max_diff(&self, s: &RefinementState) -> f64 {
        [
            self.d.max_diff(&s.depth),
            self.n.max_diff(&s.normal),
            self.l.max_diff(&s.logits),
            self.h4.max_diff(&s.hidden.quarter),
            self.h7.max_diff(&s.hidden.seventh),
            self.h14.max_diff(&s.hidden.fourteenth),
            self.hs.max_diff(&s.slz_hidden),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}
