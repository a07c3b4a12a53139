//! Arithmetic over GF(2^8) with reduction polynomial x^8+x^4+x^3+x^2+1 (0x11D).
//!
//! Table-driven: log/antilog tables over the generator alpha = 2, built at
//! compile time. The exp table is doubled so products of two logs index it
//! without a modulo.

const PRIMITIVE_POLY: u16 = 0x11D;
const EXP_LEN: usize = 512;

pub(crate) static TABLES: Tables = build_tables();

pub(crate) struct Tables {
    exp: [u8; EXP_LEN],
    log: [u8; 256],
}

const fn build_tables() -> Tables {
    let mut exp = [0u8; EXP_LEN];
    let mut log = [0u8; 256];
    let mut i = 0usize;
    let mut x: u16 = 1;
    while i < 255 {
        exp[i] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= PRIMITIVE_POLY;
        }
        i += 1;
    }
    let mut j = 255;
    while j < EXP_LEN {
        exp[j] = exp[j - 255];
        j += 1;
    }
    // log[0] stays 0; multiplicative ops never consult it.
    Tables { exp, log }
}

/// Addition and subtraction coincide: XOR.
#[inline]
pub fn add(a: u8, b: u8) -> u8 {
    a ^ b
}

#[inline]
pub fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        0
    } else {
        TABLES.exp[TABLES.log[a as usize] as usize + TABLES.log[b as usize] as usize]
    }
}

/// Multiplicative inverse; panics on zero.
#[inline]
pub fn inv(a: u8) -> u8 {
    assert!(a != 0, "zero has no inverse in GF(2^8)");
    TABLES.exp[255 - TABLES.log[a as usize] as usize]
}

#[inline]
pub fn div(a: u8, b: u8) -> u8 {
    mul(a, inv(b))
}

/// a to the n-th power, with 0^0 = 1.
pub fn pow(a: u8, mut n: u32) -> u8 {
    if n == 0 {
        return 1;
    }
    if a == 0 {
        return 0;
    }
    let mut acc = 1u8;
    let mut base = a;
    while n > 0 {
        if n & 1 == 1 {
            acc = mul(acc, base);
        }
        base = mul(base, base);
        n >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: carry-less (peasant) multiplication reduced mod
    /// 0x11D, no tables involved.
    fn peasant_mul(mut a: u8, mut b: u8) -> u8 {
        let mut p = 0u8;
        while a != 0 && b != 0 {
            if b & 1 != 0 {
                p ^= a;
            }
            let carry = a & 0x80 != 0;
            a <<= 1;
            if carry {
                a ^= (PRIMITIVE_POLY & 0xFF) as u8;
            }
            b >>= 1;
        }
        p
    }

    #[test]
    fn mul_matches_peasant_oracle_exhaustively() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(mul(a, b), peasant_mul(a, b), "a={a} b={b}");
            }
        }
    }

    #[test]
    fn inverses() {
        for a in 1..=255u8 {
            assert_eq!(mul(a, inv(a)), 1, "a={a}");
        }
    }

    #[test]
    fn pow_matches_repeated_mul() {
        for a in [0u8, 1, 2, 3, 97, 255] {
            let mut acc = 1u8;
            for n in 0..20u32 {
                assert_eq!(pow(a, n), acc, "a={a} n={n}");
                acc = mul(acc, a);
            }
        }
        assert_eq!(pow(0, 0), 1);
    }
}
