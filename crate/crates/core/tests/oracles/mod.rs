//! Brute-force reference implementations used only by tests.
//!
//! None of these call into the library code paths they check.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;

/// Region growing by fixpoint relaxation.
///
/// Each claimed voxel carries a key: the claiming seed's list position
/// followed by the direction codes of its BFS path. BFS pops voxels in
/// (length, lexicographic) key order, so a voxel's key is the smallest
/// `key(u) ++ [dir]` over neighbors `u` whose seed intensity admits it.
/// Iterating that rule from the seeds until nothing changes reproduces the
/// queue order without a queue.
pub fn region_grow_oracle(
    dims: [usize; 3],
    intensity: &[f64],
    seeds: &[[usize; 3]],
    tolerance: f64,
    radius: Option<u32>,
) -> Vec<bool> {
    let [nx, ny, nz] = dims;
    let n = nx * ny * nz;
    let at = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);

    // (key, reference intensity)
    let mut keys: Vec<Option<(Vec<u32>, f64)>> = vec![None; n];
    let mut is_seed = vec![false; n];
    for (pos, s) in seeds.iter().enumerate() {
        let idx = at(s[0], s[1], s[2]);
        if keys[idx].is_none() {
            keys[idx] = Some((vec![pos as u32], intensity[idx]));
            is_seed[idx] = true;
        }
    }

    let better = |a: &[u32], b: &[u32]| (a.len(), a) < (b.len(), b);

    loop {
        let mut next = keys.clone();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let w = at(i, j, k);
                    if is_seed[w] {
                        continue;
                    }
                    // (neighbor u, code of the direction u -> w)
                    let mut cands: Vec<(usize, u32)> = Vec::new();
                    if i + 1 < nx {
                        cands.push((at(i + 1, j, k), 0)); // u steps -x to reach w
                    }
                    if i > 0 {
                        cands.push((at(i - 1, j, k), 1));
                    }
                    if j + 1 < ny {
                        cands.push((at(i, j + 1, k), 2));
                    }
                    if j > 0 {
                        cands.push((at(i, j - 1, k), 3));
                    }
                    if k + 1 < nz {
                        cands.push((at(i, j, k + 1), 4));
                    }
                    if k > 0 {
                        cands.push((at(i, j, k - 1), 5));
                    }
                    let mut best: Option<(Vec<u32>, f64)> = None;
                    for (u, dir) in cands {
                        let Some((ku, ru)) = &keys[u] else { continue };
                        if !((intensity[w] - ru).abs() <= tolerance) {
                            continue;
                        }
                        let mut cand = ku.clone();
                        cand.push(dir);
                        if best.as_ref().is_none_or(|(b, _)| better(&cand, b)) {
                            best = Some((cand, *ru));
                        }
                    }
                    next[w] = best;
                }
            }
        }
        if next == keys {
            break;
        }
        keys = next;
    }

    keys.iter()
        .map(|k| match k {
            None => false,
            Some((key, _)) => radius.is_none_or(|r| (key.len() - 1) as u32 <= r),
        })
        .collect()
}

/// Single-seed reachability by Bellman-Ford distance relaxation.
pub fn single_seed_reach(
    dims: [usize; 3],
    intensity: &[f64],
    seed: [usize; 3],
    tolerance: f64,
    radius: Option<u32>,
) -> Vec<bool> {
    let [nx, ny, nz] = dims;
    let n = nx * ny * nz;
    let s = seed[0] + nx * (seed[1] + ny * seed[2]);
    let reference = intensity[s];
    let mut dist = vec![u64::MAX; n];
    dist[s] = 0;
    let mut changed = true;
    while changed {
        changed = false;
        for w in 0..n {
            if w == s || !((intensity[w] - reference).abs() <= tolerance) {
                continue;
            }
            let (i, j, k) = (w % nx, (w / nx) % ny, w / (nx * ny));
            let mut nb = Vec::new();
            if i > 0 {
                nb.push(w - 1);
            }
            if i + 1 < nx {
                nb.push(w + 1);
            }
            if j > 0 {
                nb.push(w - nx);
            }
            if j + 1 < ny {
                nb.push(w + nx);
            }
            if k > 0 {
                nb.push(w - nx * ny);
            }
            if k + 1 < nz {
                nb.push(w + nx * ny);
            }
            for u in nb {
                if dist[u] != u64::MAX && dist[u] + 1 < dist[w] {
                    dist[w] = dist[u] + 1;
                    changed = true;
                }
            }
        }
    }
    dist.iter().map(|&d| d != u64::MAX && radius.is_none_or(|r| d <= r as u64)).collect()
}

fn rat(n: u128) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exhaustive Otsu search with exact rational arithmetic. Returns the cut
/// (first bin of the upper class) or `None` for a single occupied bin.
pub fn otsu_cut_oracle(counts: &[u64; 256]) -> Option<usize> {
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    assert!(occupied > 0, "oracle needs a nonempty histogram");
    if occupied == 1 {
        return None;
    }
    let total: u128 = counts.iter().map(|&c| c as u128).sum();
    let mut best: Option<(usize, BigRational)> = None;
    for cut in 1..256 {
        let n0: u128 = counts[..cut].iter().map(|&c| c as u128).sum();
        let n1: u128 = counts[cut..].iter().map(|&c| c as u128).sum();
        let score = if n0 == 0 || n1 == 0 {
            rat(0)
        } else {
            let s0: u128 = (0..cut).map(|b| b as u128 * counts[b] as u128).sum();
            let s1: u128 = (cut..256).map(|b| b as u128 * counts[b] as u128).sum();
            let w0 = rat(n0) / rat(total);
            let w1 = rat(n1) / rat(total);
            let mu0 = rat(s0) / rat(n0);
            let mu1 = rat(s1) / rat(n1);
            let d = mu0 - mu1;
            w0 * w1 * &d * &d
        };
        if best.as_ref().is_none_or(|(_, b)| score > *b) {
            best = Some((cut, score));
        }
    }
    best.map(|(c, _)| c)
}

pub fn otsu_threshold_oracle(counts: &[u64; 256], lo: f64, hi: f64) -> f64 {
    match otsu_cut_oracle(counts) {
        None => lo,
        Some(c) => lo + c as f64 * (hi - lo) / 255.0,
    }
}

/// Even-odd ray test at every pixel center.
pub fn point_in_polygon_raster(polygon: &[[f64; 2]], w: u32, h: u32) -> Vec<bool> {
    let mut out = vec![false; w as usize * h as usize];
    for b in 0..h {
        for a in 0..w {
            let (px, py) = (a as f64 + 0.5, b as f64 + 0.5);
            let mut inside = false;
            let mut j = polygon.len() - 1;
            for i in 0..polygon.len() {
                let (pi, pj) = (polygon[i], polygon[j]);
                if (pi[1] > py) != (pj[1] > py) {
                    let (lo, hi) = if pi[1] < pj[1] { (pi, pj) } else { (pj, pi) };
                    let x = lo[0] + (py - lo[1]) * (hi[0] - lo[0]) / (hi[1] - lo[1]);
                    if px < x {
                        inside = !inside;
                    }
                }
                j = i;
            }
            out[a as usize + w as usize * b as usize] = inside;
        }
    }
    out
}

/// Plain FIPS 180-4 SHA-256.
pub fn sha256(msg: &[u8]) -> [u8; 32] {
    const K: [u32; 64] = [
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
        0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
        0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
        0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
        0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
        0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
        0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
        0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
    ];
    let mut h: [u32; 8] = [
        0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
    ];
    let mut data = msg.to_vec();
    data.push(0x80);
    while data.len() % 64 != 56 {
        data.push(0);
    }
    data.extend_from_slice(&((msg.len() as u64) * 8).to_be_bytes());
    for block in data.chunks_exact(64) {
        let mut w = [0u32; 64];
        for t in 0..16 {
            w[t] = u32::from_be_bytes([block[4 * t], block[4 * t + 1], block[4 * t + 2], block[4 * t + 3]]);
        }
        for t in 16..64 {
            let s0 = w[t - 15].rotate_right(7) ^ w[t - 15].rotate_right(18) ^ (w[t - 15] >> 3);
            let s1 = w[t - 2].rotate_right(17) ^ w[t - 2].rotate_right(19) ^ (w[t - 2] >> 10);
            w[t] = w[t - 16].wrapping_add(s0).wrapping_add(w[t - 7]).wrapping_add(s1);
        }
        let mut v = h;
        for t in 0..64 {
            let s1 = v[4].rotate_right(6) ^ v[4].rotate_right(11) ^ v[4].rotate_right(25);
            let ch = (v[4] & v[5]) ^ (!v[4] & v[6]);
            let t1 = v[7].wrapping_add(s1).wrapping_add(ch).wrapping_add(K[t]).wrapping_add(w[t]);
            let s0 = v[0].rotate_right(2) ^ v[0].rotate_right(13) ^ v[0].rotate_right(22);
            let maj = (v[0] & v[1]) ^ (v[0] & v[2]) ^ (v[1] & v[2]);
            let t2 = s0.wrapping_add(maj);
            v = [t1.wrapping_add(t2), v[0], v[1], v[2], v[3].wrapping_add(t1), v[4], v[5], v[6]];
        }
        for (hi, vi) in h.iter_mut().zip(v) {
            *hi = hi.wrapping_add(vi);
        }
    }
    let mut out = [0u8; 32];
    for (i, word) in h.iter().enumerate() {
        out[4 * i..4 * i + 4].copy_from_slice(&word.to_be_bytes());
    }
    out
}

/// Canonical mask bytes written by hand: dims words then LEB128 runs of
/// alternating values starting with zeros.
pub fn naive_rle_bytes(dims: [u32; 3], bits: &[bool]) -> Vec<u8> {
    let mut out = Vec::new();
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    let mut runs = Vec::new();
    let mut value = false;
    let mut i = 0;
    while i < bits.len() || runs.is_empty() {
        let mut len = 0u64;
        while i < bits.len() && bits[i] == value {
            len += 1;
            i += 1;
        }
        runs.push(len);
        value = !value;
    }
    for mut r in runs {
        loop {
            let b = (r & 0x7f) as u8;
            r >>= 7;
            if r == 0 {
                out.push(b);
                break;
            }
            out.push(b | 0x80);
        }
    }
    out
}
