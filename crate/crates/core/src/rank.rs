/// Indices of the `k` highest scores among allowed positions, best first.
/// Ties go to the lower index.
pub fn top_k<F>(scores: &[f64], k: usize, allowed: F) -> Vec<u32>
where
    F: Fn(usize) -> bool,
{
    let mut idx: Vec<u32> = (0..scores.len())
        .filter(|&i| allowed(i))
        .map(|i| i as u32)
        .collect();
    let by_score = |a: &u32, b: &u32| {
        scores[*b as usize]
            .total_cmp(&scores[*a as usize])
            .then(a.cmp(b))
    };
    if k < idx.len() {
        idx.select_nth_unstable_by(k, by_score);
        idx.truncate(k);
    }
    idx.sort_by(by_score);
    idx
}

/// Position of the best allowed score, ties to the lower index.
pub fn argmax<F>(scores: &[f64], allowed: F) -> Option<u32>
where
    F: Fn(usize) -> bool,
{
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if !allowed(i) {
            continue;
        }
        match best {
            Some(b) if scores[b] >= s => {}
            _ => best = Some(i),
        }
    }
    best.map(|b| b as u32)
}
