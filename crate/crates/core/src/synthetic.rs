//! Seeded rating and trust data with planted taste communities, sized like a
//! small movie-rating site when used with [`SyntheticSpec::film_scale`].

use std::collections::HashSet;
use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::{Normal, Zipf};

use crate::error::{Error, Result};
use crate::model::{DedupRule, InteractionStore, RawRating, SocialGraph};
use crate::rng;

const RATING_STREAM: u64 = 0x5241_5445;
const TRUST_STREAM: u64 = 0x5452_5354;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub trust_edges: usize,
    pub communities: usize,
    /// Share of a user's ratings drawn from their own community's items.
    pub affinity: f64,
    /// Share of trust edges that stay inside a community.
    pub trust_affinity: f64,
}

impl SyntheticSpec {
    /// 1508 users, 2071 items, 35 497 ratings on a 0.5–4 half-star scale.
    pub fn film_scale() -> Self {
        Self {
            users: 1508,
            items: 2071,
            ratings: 35_497,
            trust_edges: 1853,
            communities: 8,
            affinity: 0.75,
            trust_affinity: 0.85,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub store: InteractionStore,
    pub social: SocialGraph,
    /// Community of every user, by user id.
    pub user_community: Vec<(String, usize)>,
    raw: Vec<RawRating>,
    trust: Vec<(String, String)>,
}

impl SyntheticData {
    /// `user item rating` lines in generation order.
    pub fn write_ratings<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.raw {
            writeln!(out, "{} {} {}", r.user, r.item, r.rating)?;
        }
        Ok(())
    }

    /// `trustor trustee 1` lines.
    pub fn write_trust<W: Write>(&self, mut out: W) -> Result<()> {
        for (a, b) in &self.trust {
            writeln!(out, "{a} {b} 1")?;
        }
        Ok(())
    }
}

fn half_star(x: f64) -> f64 {
    ((x * 2.0).round() / 2.0).clamp(0.5, 4.0)
}

pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    let k = spec.communities;
    if k == 0 || spec.users < k || spec.items < k {
        return Err(Error::Config("need at least one user and item per community".into()));
    }
    if spec.ratings > spec.users * spec.items {
        return Err(Error::Config("more ratings requested than user-item pairs".into()));
    }
    let mut r = rng::stream(seed, &[RATING_STREAM]);
    let user_comm: Vec<usize> = (0..spec.users).map(|u| u % k).collect();
    let item_comm: Vec<usize> = (0..spec.items).map(|i| i % k).collect();
    let by_comm: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..spec.items).filter(|&i| item_comm[i] == c).collect())
        .collect();
    // Popularity is Zipf-distributed inside each community and globally.
    let zipf_in: Vec<Zipf<f64>> = by_comm
        .iter()
        .map(|v| Zipf::new(v.len() as u64, 1.1).expect("valid zipf"))
        .collect();
    let zipf_all = Zipf::new(spec.items as u64, 1.0).expect("valid zipf");
    // Activity is heavy-tailed; every user rates at least two items.
    let activity: Vec<f64> = (0..spec.users).map(|_| (r.gen::<f64>().powf(-0.6)).min(60.0)).collect();
    let pick_user = WeightedIndex::new(&activity).expect("positive weights");
    let taste = Normal::new(0.0, 0.45).expect("valid normal");
    let bias: Vec<f64> = (0..spec.users).map(|_| taste.sample(&mut r)).collect();
    let quality: Vec<f64> = (0..spec.items).map(|_| taste.sample(&mut r)).collect();

    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(spec.ratings);
    let mut raw = Vec::with_capacity(spec.ratings);
    let mut rate = |u: usize, i: usize, r: &mut rand_chacha::ChaCha8Rng, seen: &mut HashSet<(usize, usize)>| {
        if !seen.insert((u, i)) {
            return false;
        }
        let mean = if item_comm[i] == user_comm[u] { 3.3 } else { 2.2 };
        let noise: f64 = taste.sample(r);
        raw.push(RawRating {
            user: format!("{}", u + 1),
            item: format!("{}", i + 1),
            rating: half_star(mean + bias[u] + quality[i] + noise),
            timestamp: None,
        });
        true
    };
    let draw_item = |u: usize, r: &mut rand_chacha::ChaCha8Rng| {
        if r.gen::<f64>() < spec.affinity {
            let c = user_comm[u];
            by_comm[c][zipf_in[c].sample(r) as usize - 1]
        } else {
            zipf_all.sample(r) as usize - 1
        }
    };
    for u in 0..spec.users {
        let mut got = 0;
        while got < 2 {
            let i = draw_item(u, &mut r);
            if rate(u, i, &mut r, &mut seen) {
                got += 1;
            }
        }
    }
    while seen.len() < spec.ratings {
        let u = pick_user.sample(&mut r);
        let i = draw_item(u, &mut r);
        rate(u, i, &mut r, &mut seen);
    }

    let mut t = rng::stream(seed, &[TRUST_STREAM]);
    let members: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..spec.users).filter(|&u| user_comm[u] == c).collect())
        .collect();
    let mut arcs: HashSet<(usize, usize)> = HashSet::new();
    let mut trust = Vec::with_capacity(spec.trust_edges);
    let cap = spec.users * (spec.users - 1);
    while trust.len() < spec.trust_edges.min(cap) {
        let a = t.gen_range(0..spec.users);
        let b = if t.gen::<f64>() < spec.trust_affinity {
            let m = &members[user_comm[a]];
            m[t.gen_range(0..m.len())]
        } else {
            t.gen_range(0..spec.users)
        };
        if a != b && arcs.insert((a, b)) {
            trust.push((format!("{}", a + 1), format!("{}", b + 1)));
        }
    }

    let store = InteractionStore::from_records(raw.clone(), DedupRule::KeepMax)?;
    let social = SocialGraph::from_triples(trust.iter().map(|(a, b)| (a.as_str(), b.as_str(), 1.0)))?;
    let user_community = (0..spec.users).map(|u| (format!("{}", u + 1), user_comm[u])).collect();
    Ok(SyntheticData {
        store,
        social,
        user_community,
        raw,
        trust,
    })
}
