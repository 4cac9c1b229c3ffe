//! Exact rational elimination for small integer matrices.
//!
//! Stoichiometric matrices are small and integer valued, so rank and
//! null-space questions are answered in exact arithmetic and only converted
//! to floating point afterwards.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

fn to_rational(rows: &[Vec<i64>]) -> Vec<Vec<BigRational>> {
    rows.iter()
        .map(|r| r.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect())
        .collect()
}

/// Result of a reduced row echelon pass.
struct Echelon {
    rows: Vec<Vec<BigRational>>,
    /// `pivots[k]` is the pivot column of row `k`.
    pivots: Vec<usize>,
}

/// Reduced row echelon form, visiting columns in the order given.
fn rref(mut rows: Vec<Vec<BigRational>>, column_order: &[usize]) -> Echelon {
    let nrows = rows.len();
    let mut pivots = Vec::new();
    let mut next = 0;
    for &col in column_order {
        if next == nrows {
            break;
        }
        let Some(p) = (next..nrows).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(next, p);
        let inv = rows[next][col].recip();
        for v in rows[next].iter_mut() {
            *v = &*v * &inv;
        }
        let pivot_row = rows[next].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r == next || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v = &*v - &factor * p;
            }
        }
        pivots.push(col);
        next += 1;
    }
    rows.truncate(pivots.len());
    Echelon { rows, pivots }
}

/// Exact rank of an integer matrix given as rows.
pub fn rank(rows: &[Vec<i64>]) -> usize {
    let ncols = rows.first().map_or(0, Vec::len);
    let order: Vec<usize> = (0..ncols).collect();
    rref(to_rational(rows), &order).pivots.len()
}

/// Indices of rows that are linear combinations of the rows before them.
pub fn dependent_rows(rows: &[Vec<i64>]) -> Vec<usize> {
    let mut dependent = Vec::new();
    let mut kept: Vec<Vec<i64>> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        kept.push(row.clone());
        if rank(&kept) < kept.len() {
            kept.pop();
            dependent.push(i);
        }
    }
    dependent
}

/// Integer basis of the null space `{x : A x = 0}` of `a` (given as rows,
/// each of length `ncols`).
///
/// Pivots are chosen from the rightmost column leftwards, so the free
/// variables are the leading coordinates. Each basis vector is scaled to a
/// primitive integer vector whose first nonzero entry is positive.
pub fn integer_null_space(a: &[Vec<i64>], ncols: usize) -> Vec<Vec<i64>> {
    let order: Vec<usize> = (0..ncols).rev().collect();
    let ech = rref(to_rational(a), &order);
    let free: Vec<usize> = (0..ncols).filter(|c| !ech.pivots.contains(c)).collect();

    free.iter()
        .map(|&f| {
            let mut x = vec![BigRational::zero(); ncols];
            x[f] = BigRational::one();
            for (row, &p) in ech.rows.iter().zip(&ech.pivots) {
                x[p] = -row[f].clone();
            }
            primitive(&x)
        })
        .collect()
}

fn primitive(x: &[BigRational]) -> Vec<i64> {
    use num_integer::Integer;
    let lcm = x
        .iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let ints: Vec<BigInt> = x.iter().map(|v| (v * &lcm).to_integer()).collect();
    let gcd = ints
        .iter()
        .fold(BigInt::zero(), |acc, v| acc.gcd(v));
    let sign = match ints.iter().find(|v| !v.is_zero()) {
        Some(v) if v.is_negative() => -BigInt::one(),
        _ => BigInt::one(),
    };
    ints.iter()
        .map(|v| {
            let scaled = v / &gcd * &sign;
            i64::try_from(scaled).expect("null-space entry exceeds i64")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_st() -> Vec<Vec<i64>> {
        vec![vec![-1, -2, 1, 0], vec![0, 1, -1, 2]]
    }

    #[test]
    fn rank_of_example() {
        assert_eq!(rank(&example_st()), 2);
        assert_eq!(rank(&[vec![-1, 1], vec![-2, 2]]), 1);
        assert_eq!(rank(&[vec![0, 0]]), 0);
    }

    #[test]
    fn dependent_rows_found() {
        assert_eq!(dependent_rows(&[vec![-1, 1], vec![-2, 2]]), vec![1]);
        assert!(dependent_rows(&example_st()).is_empty());
        assert_eq!(
            dependent_rows(&[vec![1, 0, 0], vec![0, 1, 0], vec![1, 1, 0]]),
            vec![2]
        );
    }

    #[test]
    fn null_space_of_example() {
        let basis = integer_null_space(&example_st(), 4);
        assert_eq!(basis, vec![vec![2, 0, 2, 1], vec![0, 2, 4, 1]]);
    }

    #[test]
    fn null_space_single_reaction() {
        assert_eq!(integer_null_space(&[vec![-1, 1]], 2), vec![vec![1, 1]]);
        assert!(integer_null_space(&[vec![1, 0], vec![0, 1]], 2).is_empty());
    }
}
