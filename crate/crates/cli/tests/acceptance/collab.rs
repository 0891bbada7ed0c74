use std::collections::{BTreeMap, BTreeSet};

use hyvid_core::collab::{diff_pair, grade, merge, DiffReport, MergePolicy};
use hyvid_core::model::{Annotation, AnnotationSet, Body, Millis, TimeFragment, Timestamp};
use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::gen::{self, Rng, RESOURCES};
use crate::Outcome;

const DURATION: Millis = 600_000;

fn link(rng: &mut Rng, id: String, rid: &str, begin: Millis, end: Millis) -> Annotation {
    Annotation {
        id: id.into(),
        author: "u".into(),
        created: Timestamp::from_unix_millis(rng.random_range(0..1_000_000)),
        modified: Timestamp::from_unix_millis(1_000_000),
        fragment: TimeFragment::new(begin, end),
        body: Body::ResourceLink {
            resource_id: rid.into(),
            note: None,
        },
        tags: vec![],
    }
}

fn comment(rng: &mut Rng, id: String) -> Annotation {
    Annotation {
        body: Body::Comment {
            text: gen::text(rng),
        },
        fragment: gen::fragment(rng, DURATION),
        ..link(rng, id, "r0", 0, 0)
    }
}

/// Sets with ≤5 resources and begins on the 10 s grid.
fn grid_sets(rng: &mut Rng, count: usize, resources: usize) -> Vec<AnnotationSet> {
    (0..count)
        .map(|k| {
            let mut anns = Vec::new();
            for rid in &RESOURCES[..resources] {
                for _ in 0..*[0, 0, 1, 1, 1, 2].choose(rng).unwrap() {
                    let begin = rng.random_range(0..10) * 10_000;
                    let end = begin + [0, 5_000, 10_000, 25_000].choose(rng).unwrap();
                    let id = format!("a{}", anns.len());
                    anns.push(link(rng, id, rid, begin, end));
                }
            }
            for _ in 0..rng.random_range(0..3) {
                let id = format!("a{}", anns.len());
                anns.push(comment(rng, id));
            }
            AnnotationSet {
                annotations: anns,
                ..AnnotationSet::new(format!("s{k}"), "v", format!("user{k}"))
            }
        })
        .collect()
}

/// Middle value, or the mean of the two middle values rounded half-up.
fn median(mut xs: Vec<Millis>) -> Millis {
    xs.sort_unstable();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        let sum = xs[n / 2 - 1] + xs[n / 2];
        sum / 2 + sum % 2
    }
}

type OracleMerge = BTreeMap<String, (Millis, Millis, BTreeSet<(String, String)>)>;

fn majority_oracle(sets: &[AnnotationSet], quorum: usize) -> OracleMerge {
    let mut out = OracleMerge::new();
    for rid in RESOURCES {
        let mut reps = Vec::new();
        for set in sets {
            let rep = set
                .annotations
                .iter()
                .filter(|a| matches!(&a.body, Body::ResourceLink { resource_id, .. } if resource_id.as_str() == *rid))
                .min_by(|x, y| {
                    (x.fragment.begin_ms, x.fragment.end_ms, x.id.as_str()).cmp(&(
                        y.fragment.begin_ms,
                        y.fragment.end_ms,
                        y.id.as_str(),
                    ))
                });
            if let Some(a) = rep {
                reps.push((set.id.to_string(), a));
            }
        }
        if !reps.is_empty() && reps.len() >= quorum {
            let begin = median(reps.iter().map(|(_, a)| a.fragment.begin_ms).collect());
            let end = median(reps.iter().map(|(_, a)| a.fragment.end_ms).collect()).max(begin);
            let sources = reps
                .iter()
                .map(|(s, a)| (s.clone(), a.id.to_string()))
                .collect();
            out.insert(rid.to_string(), (begin, end, sources));
        }
    }
    out
}

pub fn a3_majority_oracle() -> Outcome {
    let mut rng = gen::rng(0xA3);
    let cases = 10_000;
    for n in 0..cases {
        let count = rng.random_range(1..=4);
        let resources = rng.random_range(1..=5);
        let sets = grid_sets(&mut rng, count, resources);
        let quorum = rng.random_range(1..=count);
        let result = merge(&sets, &MergePolicy::Majority { quorum })
            .map_err(|e| format!("case {n}: {e}"))?;
        let mut got = OracleMerge::new();
        for m in &result.merged {
            let Body::ResourceLink {
                resource_id,
                note: None,
            } = &m.body
            else {
                return Err(format!("case {n}: merged a non-link {m:?}"));
            };
            let sources = result
                .provenance
                .get(&m.id)
                .ok_or(format!("case {n}: no provenance for {}", m.id))?;
            let sources = sources
                .iter()
                .map(|s| (s.set_id.to_string(), s.annotation_id.to_string()))
                .collect();
            if got
                .insert(
                    resource_id.to_string(),
                    (m.fragment.begin_ms, m.fragment.end_ms, sources),
                )
                .is_some()
            {
                return Err(format!("case {n}: resource {resource_id} merged twice"));
            }
        }
        let want = majority_oracle(&sets, quorum);
        if got != want {
            return Err(format!(
                "case {n} (quorum {quorum}): merge {got:?} != oracle {want:?}"
            ));
        }
        let total: usize = sets.iter().map(|s| s.annotations.len()).sum();
        let used: usize = want.values().map(|(_, _, s)| s.len()).sum();
        if used + result.dropped.len() != total {
            return Err(format!(
                "case {n}: {used} used + {} dropped != {total} inputs",
                result.dropped.len()
            ));
        }
    }
    Ok(format!(
        "{cases} instances (≤4 sets, ≤5 resources, 10 s grid), 0 mismatches"
    ))
}

fn random_set(rng: &mut Rng, id: &str) -> AnnotationSet {
    let mut anns = Vec::new();
    for _ in 0..rng.random_range(0..12) {
        let aid = format!("{id}-{}", anns.len());
        let a = if rng.random_bool(0.7) {
            let rid = RESOURCES.choose(rng).unwrap();
            let begin = rng.random_range(0..100) * 500;
            let end = begin + rng.random_range(0..20) * 500;
            link(rng, aid, rid, begin, end)
        } else {
            let mut c = comment(rng, aid);
            if rng.random_bool(0.5) {
                c.body = Body::Overlay {
                    text: "o".into(),
                    region: gen::region(rng),
                };
            }
            c
        };
        anns.push(a);
    }
    AnnotationSet {
        annotations: anns,
        ..AnnotationSet::new(id, "v", id)
    }
}

fn check_partition(set: &AnnotationSet, appearances: Vec<&Annotation>) -> Result<(), String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &appearances {
        *seen.entry(a.id.as_str()).or_default() += 1;
    }
    for a in &set.annotations {
        match seen.get(a.id.as_str()) {
            Some(1) => {}
            other => {
                return Err(format!(
                    "{} appears {} times",
                    a.id,
                    other.copied().unwrap_or(0)
                ))
            }
        }
    }
    if appearances.len() != set.annotations.len() {
        return Err(format!(
            "{} appearances for {} annotations",
            appearances.len(),
            set.annotations.len()
        ));
    }
    Ok(())
}

fn sides(r: &DiffReport) -> (Vec<&Annotation>, Vec<&Annotation>) {
    let mut a: Vec<&Annotation> = r
        .agreements
        .iter()
        .map(|x| &x.a)
        .chain(r.disagreements.iter().map(|x| &x.a))
        .collect();
    let mut b: Vec<&Annotation> = r
        .agreements
        .iter()
        .map(|x| &x.b)
        .chain(r.disagreements.iter().map(|x| &x.b))
        .collect();
    a.extend(&r.unique_a);
    b.extend(&r.unique_b);
    (a, b)
}

pub fn a4_diff() -> Outcome {
    let mut rng = gen::rng(0xA4);
    for n in 0..1000 {
        let a = random_set(&mut rng, "sa");
        let b = random_set(&mut rng, "sb");
        let tol = *[0, 500, 1000, 2000, 5000].choose(&mut rng).unwrap();
        let ab = diff_pair(&a, &b, tol).map_err(|e| format!("case {n}: {e}"))?;
        let ba = diff_pair(&b, &a, tol).map_err(|e| format!("case {n}: {e}"))?;

        let (in_a, in_b) = sides(&ab);
        check_partition(&a, in_a).map_err(|e| format!("case {n}, side a: {e}"))?;
        check_partition(&b, in_b).map_err(|e| format!("case {n}, side b: {e}"))?;
        for x in &ab.agreements {
            let (db, de) = (
                x.b.fragment.begin_ms - x.a.fragment.begin_ms,
                x.b.fragment.end_ms - x.a.fragment.end_ms,
            );
            if db.abs() > tol || de.abs() > tol {
                return Err(format!(
                    "case {n}: agreement on {} outside tolerance",
                    x.resource_id
                ));
            }
        }
        for x in &ab.disagreements {
            if x.delta_begin_ms.abs() <= tol && x.delta_end_ms.abs() <= tol {
                return Err(format!(
                    "case {n}: disagreement on {} within tolerance",
                    x.resource_id
                ));
            }
        }

        let swapped: Vec<_> = ba
            .agreements
            .iter()
            .map(|x| (&x.resource_id, &x.b, &x.a))
            .collect();
        let direct: Vec<_> = ab
            .agreements
            .iter()
            .map(|x| (&x.resource_id, &x.a, &x.b))
            .collect();
        if swapped != direct {
            return Err(format!("case {n}: agreements do not mirror"));
        }
        let swapped: Vec<_> = ba
            .disagreements
            .iter()
            .map(|x| {
                (
                    &x.resource_id,
                    &x.b,
                    &x.a,
                    -x.delta_begin_ms,
                    -x.delta_end_ms,
                )
            })
            .collect();
        let direct: Vec<_> = ab
            .disagreements
            .iter()
            .map(|x| (&x.resource_id, &x.a, &x.b, x.delta_begin_ms, x.delta_end_ms))
            .collect();
        if swapped != direct {
            return Err(format!(
                "case {n}: disagreements do not mirror with negated deltas"
            ));
        }
        if ab.unique_a != ba.unique_b || ab.unique_b != ba.unique_a {
            return Err(format!("case {n}: uniques do not mirror"));
        }
    }
    Ok(
        "1000 random pairs: exact partition, diff(a,b) mirrors diff(b,a) with negated deltas"
            .into(),
    )
}

fn key_set(rng: &mut Rng) -> AnnotationSet {
    let mut anns = Vec::new();
    for rid in &RESOURCES[..rng.random_range(1..=5)] {
        for _ in 0..rng.random_range(1..=2) {
            let begin = rng.random_range(0..DURATION / 1000) * 1000;
            let id = format!("k{}", anns.len());
            anns.push(link(rng, id, rid, begin, begin));
        }
    }
    AnnotationSet {
        annotations: anns,
        ..AnnotationSet::new("key", "v", "teacher")
    }
}

fn learner_set(rng: &mut Rng, key: &AnnotationSet) -> AnnotationSet {
    let mut anns = Vec::new();
    for k in &key.annotations {
        if rng.random_bool(0.8) {
            let begin =
                (k.fragment.begin_ms + rng.random_range(-20_000..=20_000)).clamp(0, DURATION);
            let rid = k.body.resource_id().unwrap().as_str();
            let id = format!("l{}", anns.len());
            anns.push(link(rng, id, rid, begin, begin));
        }
    }
    for _ in 0..rng.random_range(0..3) {
        let id = format!("l{}", anns.len());
        anns.push(comment(rng, id));
    }
    AnnotationSet {
        annotations: anns,
        ..AnnotationSet::new("learner", "v", "learner")
    }
}

/// Earliest begin per linked resource.
fn earliest_begins(set: &AnnotationSet) -> BTreeMap<String, Millis> {
    let mut out: BTreeMap<String, Millis> = BTreeMap::new();
    for a in &set.annotations {
        if let Body::ResourceLink { resource_id, .. } = &a.body {
            let e = out
                .entry(resource_id.to_string())
                .or_insert(a.fragment.begin_ms);
            *e = (*e).min(a.fragment.begin_ms);
        }
    }
    out
}

fn grade_oracle(learner: &AnnotationSet, key: &AnnotationSet, tol: Millis) -> f64 {
    let want = earliest_begins(key);
    let got = earliest_begins(learner);
    if want.is_empty() {
        return 1.0;
    }
    let correct = want
        .iter()
        .filter(|(rid, k)| got.get(*rid).is_some_and(|l| (l - *k).abs() <= tol))
        .count();
    correct as f64 / want.len() as f64
}

pub fn a6_grading() -> Outcome {
    let mut rng = gen::rng(0xA6);
    let tolerances = [0, 1, 500, 1000, 2000, 5000, 10_000, 20_000, 1_000_000];
    for n in 0..1000 {
        let key = key_set(&mut rng);
        let self_score = grade(&key, &key, 0)
            .map_err(|e| format!("case {n}: {e}"))?
            .score;
        if self_score != 1.0 {
            return Err(format!("case {n}: grade(key,key,0) = {self_score}"));
        }
        let empty = AnnotationSet::new("empty", "v", "learner");
        let empty_score = grade(&empty, &key, 2000)
            .map_err(|e| format!("case {n}: {e}"))?
            .score;
        if empty_score != 0.0 {
            return Err(format!("case {n}: empty learner scored {empty_score}"));
        }
        let learner = learner_set(&mut rng, &key);
        let mut last = 0.0;
        for tol in tolerances {
            let report = grade(&learner, &key, tol).map_err(|e| format!("case {n}: {e}"))?;
            if report.correct + report.missing.len() + report.misplaced.len() != report.total {
                return Err(format!("case {n}: report categories do not sum to total"));
            }
            let want = grade_oracle(&learner, &key, tol);
            if report.score != want {
                return Err(format!(
                    "case {n}, tol {tol}: score {} != oracle {want}",
                    report.score
                ));
            }
            if report.score < last {
                return Err(format!(
                    "case {n}: score fell from {last} to {} at tol {tol}",
                    report.score
                ));
            }
            last = report.score;
        }
    }
    Ok("self-grade 1.0, empty learner 0.0, scores monotone in tolerance and equal to oracle on 1000 instances".into())
}
