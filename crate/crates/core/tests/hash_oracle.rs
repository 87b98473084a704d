//! `hash_embed` against vectors frozen from an independent reference hasher
//! (`oracles/hash_embed_oracle.py`).

use token_shapley::embedding::hash_embed;

fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn expected(dim: usize, nonzero: &[(usize, u32)]) -> Vec<u32> {
    let mut out = vec![0u32; dim];
    for &(i, b) in nonzero {
        out[i] = b;
    }
    out
}

#[test]
fn alpha_dim_64() {
    const P: u32 = 0x3e93cd3a;
    const N: u32 = 0xbe93cd3a;
    let want = expected(
        64,
        &[(8, N), (12, P), (18, P), (36, N), (46, P), (48, N), (56, N), (60, 0x3f13cd3a), (62, N)],
    );
    assert_eq!(bits(&hash_embed("alpha", 64)), want);
}

#[test]
fn key_17_dim_16() {
    const P: u32 = 0x3e8e00d5;
    const N: u32 = 0xbe8e00d5;
    let counts = [-1, -1, -1, 1, -1, 0, 1, 0, -1, -1, -1, -1, 1, 1, -1, 0];
    let want: Vec<u32> = counts.iter().map(|&c: &i32| match c { 1 => P, -1 => N, _ => 0 }).collect();
    assert_eq!(bits(&hash_embed("key-17", 16)), want);
}

#[test]
fn empty_text_is_zero_vector() {
    assert!(hash_embed("", 32).iter().all(|&x| x == 0.0));
}
