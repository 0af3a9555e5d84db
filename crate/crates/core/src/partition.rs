//! Set partitions as restricted-growth strings.
//!
//! A partition of `{0, .., n-1}` is a string `b` with `b[0] = 0` and
//! `b[i] <= 1 + max(b[..i])`; `b[i]` is the block of element `i`. Enumeration is in
//! lexicographic order of the strings.

/// Bell number `B(n)`, the number of partitions of an `n`-set. `None` on overflow.
pub fn bell_number(n: usize) -> Option<u64> {
    // Bell triangle.
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last()?);
        for &x in &row {
            let v = next.last()?.checked_add(x)?;
            next.push(v);
        }
        row = next;
    }
    row.first().copied()
}

/// Calls `visit(b, blocks)` for every restricted-growth string of length `n` that
/// starts with `prefix`, in lexicographic order. `prefix` must itself be a valid
/// restricted-growth string (possibly empty).
pub fn for_each_completion<F: FnMut(&[u8], usize)>(n: usize, prefix: &[u8], mut visit: F) {
    assert!(n <= u8::MAX as usize);
    assert!(prefix.len() <= n);
    if n == 0 {
        visit(&[], 0);
        return;
    }
    let mut b = vec![0u8; n];
    b[..prefix.len()].copy_from_slice(prefix);
    // max_upto[i] = max(b[..=i])
    let mut max_upto = vec![0u8; n];
    for i in 0..prefix.len() {
        max_upto[i] = if i == 0 { b[0] } else { max_upto[i - 1].max(b[i]) };
    }
    let start = prefix.len().max(1);
    if prefix.is_empty() {
        b[0] = 0;
        max_upto[0] = 0;
    }
    fill(&mut b, &mut max_upto, start);
    loop {
        visit(&b, max_upto[n - 1] as usize + 1);
        // Find the rightmost position (not fixed by the prefix) that can grow.
        let mut i = n - 1;
        loop {
            if i < start {
                return;
            }
            if b[i] <= max_upto[i - 1] {
                b[i] += 1;
                max_upto[i] = max_upto[i - 1].max(b[i]);
                fill(&mut b, &mut max_upto, i + 1);
                break;
            }
            i -= 1;
        }
    }
}

fn fill(b: &mut [u8], max_upto: &mut [u8], from: usize) {
    for j in from..b.len() {
        b[j] = 0;
        max_upto[j] = max_upto[j - 1];
    }
}

/// All restricted-growth strings of length `n`, in lexicographic order.
pub fn partitions(n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for_each_completion(n, &[], |b, _| out.push(b.to_vec()));
    out
}
