use super::Corpus;
use crate::error::{Error, Result};
use crate::nn::Rng;

/// Sattolo's algorithm: a uniformly random cyclic permutation, hence a
/// derangement for `n >= 2`.
fn derangement(rng: &mut Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.index(i);
        p.swap(i, j);
    }
    p
}

/// Swaps language bundles across videos so that no video keeps language about
/// its own classes.
///
/// Class identities are deranged; each video of primary class `c` receives the
/// bundle of a video whose classes include `derangement[c]` and exclude all of
/// its own (falling back to any video with disjoint classes). Vision and ground
/// truth are untouched.
pub fn inject_conflict(corpus: &Corpus, rng: &mut Rng) -> Result<Corpus> {
    let c = corpus.config.num_classes;
    if c < 2 {
        return Err(Error::invalid("num_classes", format!("conflict injection needs >= 2 classes, got {c}")));
    }
    if let Some(v) = corpus.videos.iter().find(|v| !v.lang.aligned) {
        return Err(Error::invalid("aligned", format!("video {} is already conflict-injected", v.id)));
    }
    let perm = derangement(rng, c);
    let class_sets: Vec<Vec<usize>> = corpus.videos.iter().map(|v| v.classes()).collect();
    let mut out = corpus.clone();
    for (i, video) in corpus.videos.iter().enumerate() {
        let own = &class_sets[i];
        let disjoint = |j: &usize| class_sets[*j].iter().all(|k| !own.contains(k));
        let candidates: Vec<usize> = match video.primary_class() {
            Some(primary) => {
                let target = perm[primary];
                let exact: Vec<usize> = (0..corpus.len())
                    .filter(|j| class_sets[*j].contains(&target))
                    .filter(disjoint)
                    .collect();
                if exact.is_empty() {
                    (0..corpus.len()).filter(|j| !class_sets[*j].is_empty()).filter(disjoint).collect()
                } else {
                    exact
                }
            }
            None => (0..corpus.len()).filter(|j| !class_sets[*j].is_empty()).collect(),
        };
        if candidates.is_empty() {
            return Err(Error::invalid(
                "corpus",
                format!("no donor with disjoint classes for video {}", video.id),
            ));
        }
        let donor = &corpus.videos[candidates[rng.index(candidates.len())]];
        let lang = &mut out.videos[i].lang;
        *lang = donor.lang.clone();
        lang.aligned = false;
        lang.donor = Some(donor.id.clone());
    }
    Ok(out)
}
