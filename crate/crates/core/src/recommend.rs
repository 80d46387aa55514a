//! Personalization: user-based collaborative filtering with mean-centred cosine
//! similarity, content matching against a profile, and a linear blend of both.
//!
//! Every returned list is ordered by score descending, then option id ascending.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{BudgetBand, Catalog, OptionId, OptionKind, TravelOption, UserProfile};
use crate::sustainability::CarbonConfig;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RecommendError {
    #[error("unknown user {0}")]
    UnknownUser(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Collaborative,
    Content,
    Blended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub option_id: OptionId,
    pub score: f64,
    pub source: Source,
}

fn rank_order(a: &Recommendation, b: &Recommendation) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.option_id.cmp(&b.option_id))
}

fn top_n(mut v: Vec<Recommendation>, n: usize) -> Vec<Recommendation> {
    v.sort_by(rank_order);
    v.truncate(n);
    v
}

/// Dense users x options matrix of ratings in [1, 5].
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    users: Vec<String>,
    items: Vec<OptionId>,
    rows: Vec<Vec<Option<f64>>>,
    user_index: HashMap<String, usize>,
}

impl RatingMatrix {
    /// Items are the catalog options in catalog order; ratings outside the
    /// catalog or outside [1, 5] are ignored. A repeated rating overwrites.
    pub fn build(profiles: &[UserProfile], catalog: &Catalog) -> Self {
        let items: Vec<OptionId> = catalog.options().iter().map(|o| o.id.clone()).collect();
        let item_index: HashMap<&OptionId, usize> = items.iter().enumerate().map(|(i, id)| (id, i)).collect();
        let mut rows = Vec::with_capacity(profiles.len());
        let mut users = Vec::with_capacity(profiles.len());
        let mut user_index = HashMap::new();
        for p in profiles {
            let mut row = vec![None; items.len()];
            for r in &p.booking_history {
                if let Some(&j) = item_index.get(&r.option_id) {
                    if (1.0..=5.0).contains(&r.rating) {
                        row[j] = Some(r.rating);
                    }
                }
            }
            user_index.insert(p.user_id.clone(), users.len());
            users.push(p.user_id.clone());
            rows.push(row);
        }
        RatingMatrix {
            users,
            items,
            rows,
            user_index,
        }
    }

    /// Builds directly from rows; used by tests and toy examples.
    pub fn from_rows(users: Vec<String>, items: Vec<OptionId>, rows: Vec<Vec<Option<f64>>>) -> Self {
        assert!(rows.iter().all(|r| r.len() == items.len()), "row width mismatch");
        assert_eq!(users.len(), rows.len(), "one row per user");
        let user_index = users.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
        RatingMatrix {
            users,
            items,
            rows,
            user_index,
        }
    }

    pub fn row(&self, user_id: &str) -> Option<&[Option<f64>]> {
        self.user_index.get(user_id).map(|&i| self.rows[i].as_slice())
    }

    pub fn items(&self) -> &[OptionId] {
        &self.items
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub value: f64,
    pub no_overlap: bool,
}

/// Cosine of the two rows after centring each on its mean over co-rated items.
pub fn cosine_similarity(u: &[Option<f64>], v: &[Option<f64>]) -> Similarity {
    let pairs: Vec<(f64, f64)> = u
        .iter()
        .zip(v)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .collect();
    if pairs.is_empty() {
        return Similarity {
            value: 0.0,
            no_overlap: true,
        };
    }
    let n = pairs.len() as f64;
    let mu = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        let (a, b) = (a - mu, b - mv);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    let value = if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0)
    };
    Similarity {
        value,
        no_overlap: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfResult {
    pub recommendations: Vec<Recommendation>,
    pub cold_start: bool,
}

/// Predicts unrated items from the `k` most similar users with positive
/// similarity: `sum(sim * rating) / sum(sim)` over neighbours who rated the item.
pub fn recommend_collaborative(
    matrix: &RatingMatrix,
    user_id: &str,
    k_neighbors: usize,
    n: usize,
) -> Result<CfResult, RecommendError> {
    let &ui = matrix
        .user_index
        .get(user_id)
        .ok_or_else(|| RecommendError::UnknownUser(user_id.to_owned()))?;
    let me = &matrix.rows[ui];
    if me.iter().all(Option::is_none) {
        return Ok(CfResult {
            recommendations: Vec::new(),
            cold_start: true,
        });
    }
    let mut neighbours: Vec<(usize, f64)> = matrix
        .rows
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != ui)
        .filter_map(|(j, row)| {
            let s = cosine_similarity(me, row);
            (!s.no_overlap && s.value > 0.0).then_some((j, s.value))
        })
        .collect();
    neighbours.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    neighbours.truncate(k_neighbors);

    let mut recs = Vec::new();
    for (item, mine) in me.iter().enumerate() {
        if mine.is_some() {
            continue;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(j, s) in &neighbours {
            if let Some(r) = matrix.rows[j][item] {
                num += s * r;
                den += s;
            }
        }
        if den > 0.0 {
            recs.push(Recommendation {
                option_id: matrix.items[item].clone(),
                score: num / den,
                source: Source::Collaborative,
            });
        }
    }
    Ok(CfResult {
        recommendations: top_n(recs, n),
        cold_start: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContentWeights {
    pub mode: f64,
    pub budget: f64,
    pub eco: f64,
}

impl Default for ContentWeights {
    fn default() -> Self {
        ContentWeights {
            mode: 1.0 / 3.0,
            budget: 1.0 / 3.0,
            eco: 1.0 / 3.0,
        }
    }
}

/// Per-kind price tertiles used to place an option in a budget band.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceBands {
    edges: BTreeMap<OptionKind, (f64, f64)>,
}

impl PriceBands {
    pub fn from_catalog(catalog: &Catalog) -> Self {
        let mut by_kind: BTreeMap<OptionKind, Vec<f64>> = BTreeMap::new();
        for o in catalog.options() {
            by_kind.entry(o.kind).or_default().push(o.price);
        }
        let edges = by_kind
            .into_iter()
            .map(|(k, mut p)| {
                p.sort_by(f64::total_cmp);
                let q = |f: f64| p[((p.len() - 1) as f64 * f).round() as usize];
                (k, (q(1.0 / 3.0), q(2.0 / 3.0)))
            })
            .collect();
        PriceBands { edges }
    }

    pub fn band(&self, option: &TravelOption) -> BudgetBand {
        match self.edges.get(&option.kind) {
            Some(&(lo, _)) if option.price <= lo => BudgetBand::Low,
            Some(&(_, hi)) if option.price <= hi => BudgetBand::Mid,
            Some(_) => BudgetBand::High,
            None => BudgetBand::Mid,
        }
    }
}

/// Option eco attribute on a 0..1 scale: hotels use their rating, transport
/// maps its emission factor so the cleanest mode scores highest.
pub fn option_eco(option: &TravelOption, carbon: &CarbonConfig) -> f64 {
    if option.kind.is_transport() {
        let max = carbon.max_transport_factor();
        if max > 0.0 {
            1.0 - carbon.factor(option.kind) / max
        } else {
            1.0
        }
    } else {
        option.eco_rating
    }
}

/// Neutral value for criteria where the profile expresses no opinion.
pub const NEUTRAL: f64 = 0.5;

pub fn content_score(
    profile: &UserProfile,
    option: &TravelOption,
    bands: &PriceBands,
    carbon: &CarbonConfig,
    w: &ContentWeights,
) -> f64 {
    let mode = if profile.preferred_modes.is_empty() || !option.kind.is_transport() {
        NEUTRAL
    } else if profile.preferred_modes.contains(&option.kind) {
        1.0
    } else {
        0.0
    };
    let budget = if bands.band(option) == profile.budget_band { 1.0 } else { 0.0 };
    let eco = 1.0 - (profile.eco_affinity - option_eco(option, carbon)).abs();
    let total = w.mode + w.budget + w.eco;
    if total <= 0.0 {
        return 0.0;
    }
    (w.mode * mode + w.budget * budget + w.eco * eco) / total
}

pub fn recommend_content(
    profile: &UserProfile,
    catalog: &Catalog,
    n: usize,
    weights: &ContentWeights,
    carbon: &CarbonConfig,
) -> Vec<Recommendation> {
    let bands = PriceBands::from_catalog(catalog);
    let recs = catalog
        .options()
        .iter()
        .map(|o| Recommendation {
            option_id: o.id.clone(),
            score: content_score(profile, o, &bands, carbon, weights),
            source: Source::Content,
        })
        .collect();
    top_n(recs, n)
}

fn min_max(list: &[Recommendation]) -> HashMap<&OptionId, f64> {
    let lo = list.iter().map(|r| r.score).fold(f64::INFINITY, f64::min);
    let hi = list.iter().map(|r| r.score).fold(f64::NEG_INFINITY, f64::max);
    list.iter()
        .map(|r| {
            let s = if hi > lo { (r.score - lo) / (hi - lo) } else { 1.0 };
            (&r.option_id, s)
        })
        .collect()
}

/// `lambda * cf + (1 - lambda) * cb` after min-max normalizing each list;
/// an option missing from one list gets 0 from that side. A list whose scores
/// are all equal normalizes to 1.
pub fn blend(cf: &[Recommendation], cb: &[Recommendation], lambda: f64, n: usize) -> Vec<Recommendation> {
    let lambda = lambda.clamp(0.0, 1.0);
    let ncf = min_max(cf);
    let ncb = min_max(cb);
    // a source with zero weight contributes no candidates
    let from_cf = ncf.keys().filter(|_| lambda > 0.0);
    let from_cb = ncb.keys().filter(|_| lambda < 1.0);
    let mut ids: Vec<&OptionId> = from_cf.chain(from_cb).copied().collect();
    ids.sort();
    ids.dedup();
    let recs = ids
        .into_iter()
        .map(|id| Recommendation {
            option_id: id.clone(),
            score: lambda * ncf.get(id).copied().unwrap_or(0.0)
                + (1.0 - lambda) * ncb.get(id).copied().unwrap_or(0.0),
            source: Source::Blended,
        })
        .collect();
    top_n(recs, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Rating;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn r(x: f64) -> Option<f64> {
        Some(x)
    }

    #[test]
    fn cosine_examples() {
        let a = [r(5.0), r(3.0), r(4.0)];
        assert!((cosine_similarity(&a, &a).value - 1.0).abs() < 1e-12);

        // hand computation: centred [1,-1,0] and [1/3,-5/3,4/3]
        // dot = 2, |u| = sqrt(2), |v| = sqrt(42)/3 -> 6 / sqrt(84)
        let b = [r(4.0), r(2.0), r(5.0)];
        let s = cosine_similarity(&a, &b);
        assert!((s.value - 6.0 / 84f64.sqrt()).abs() < 1e-12);
        assert!((s.value - 0.654_653_670_7).abs() < 1e-9);

        // centred [1,-1,0,0] vs [0,0,1,-1] are orthogonal
        let u = [r(4.0), r(2.0), r(3.0), r(3.0)];
        let v = [r(3.0), r(3.0), r(4.0), r(2.0)];
        assert_eq!(cosine_similarity(&u, &v).value, 0.0);

        let none = cosine_similarity(&[r(1.0), None], &[None, r(2.0)]);
        assert!(none.no_overlap);
        assert_eq!(none.value, 0.0);
        // constant row centres to zero
        assert_eq!(cosine_similarity(&[r(3.0), r(3.0)], &[r(1.0), r(5.0)]).value, 0.0);
    }

    fn ids(n: usize) -> Vec<OptionId> {
        (0..n).map(|i| OptionId(format!("o{i}"))).collect()
    }

    #[test]
    fn clone_user_items_surface_first() {
        // target and clone agree on o0..o2; clone also loves o3; the contrarian loves o4
        let m = RatingMatrix::from_rows(
            vec!["t".into(), "clone".into(), "other".into()],
            ids(5),
            vec![
                vec![r(5.0), r(1.0), r(3.0), None, None],
                vec![r(5.0), r(1.0), r(3.0), r(5.0), r(1.0)],
                vec![r(1.0), r(5.0), r(3.0), r(1.0), r(5.0)],
            ],
        );
        let res = recommend_collaborative(&m, "t", 5, 10).unwrap();
        assert!(!res.cold_start);
        // only the clone has positive similarity: predictions are its ratings
        let got: Vec<(&str, f64)> = res.recommendations.iter().map(|r| (r.option_id.as_str(), r.score)).collect();
        assert_eq!(got, vec![("o3", 5.0), ("o4", 1.0)]);
    }

    #[test]
    fn cf_edge_cases() {
        let single = RatingMatrix::from_rows(vec!["a".into()], ids(2), vec![vec![r(4.0), None]]);
        assert!(recommend_collaborative(&single, "a", 3, 5).unwrap().recommendations.is_empty());
        let m = RatingMatrix::from_rows(
            vec!["a".into(), "b".into()],
            ids(3),
            vec![vec![r(4.0), r(2.0), None], vec![r(5.0), r(1.0), r(3.0)]],
        );
        assert!(recommend_collaborative(&m, "a", 3, 0).unwrap().recommendations.is_empty());
        assert_eq!(
            recommend_collaborative(&m, "zz", 3, 5),
            Err(RecommendError::UnknownUser("zz".into()))
        );
        let cold = RatingMatrix::from_rows(vec!["c".into()], ids(2), vec![vec![None, None]]);
        assert!(recommend_collaborative(&cold, "c", 3, 5).unwrap().cold_start);
    }

    fn catalog() -> Catalog {
        let mk = |id: &str, kind, price, eco| TravelOption {
            id: id.into(),
            kind,
            origin: if kind == OptionKind::Hotel { String::new() } else { "A".into() },
            destination: "B".into(),
            depart_time: 0,
            arrive_time: 60,
            price,
            distance_km: if kind == OptionKind::Hotel { 0.0 } else { 100.0 },
            capacity: 1,
            eco_rating: eco,
        };
        Catalog::new(
            ["A", "B"].map(String::from),
            vec![
                mk("t-cheap", OptionKind::Train, 10.0, 0.0),
                mk("t-mid", OptionKind::Train, 20.0, 0.0),
                mk("t-dear", OptionKind::Train, 30.0, 0.0),
                mk("f-cheap", OptionKind::Flight, 50.0, 0.0),
                mk("h-green", OptionKind::Hotel, 80.0, 1.0),
            ],
        )
        .unwrap()
    }

    fn profile(modes: &[OptionKind], band: BudgetBand, eco: f64) -> UserProfile {
        UserProfile {
            user_id: "p".into(),
            preferred_modes: modes.iter().copied().collect::<BTreeSet<_>>(),
            budget_band: band,
            eco_affinity: eco,
            booking_history: vec![],
        }
    }

    #[test]
    fn content_full_match_and_neutral() {
        let c = catalog();
        let bands = PriceBands::from_catalog(&c);
        let carbon = CarbonConfig::default();
        let w = ContentWeights::default();
        let train = c.get(&"t-cheap".into()).unwrap();
        let train_eco = option_eco(train, &carbon);
        let p = profile(&[OptionKind::Train], BudgetBand::Low, train_eco);
        assert!((content_score(&p, train, &bands, &carbon, &w) - 1.0).abs() < 1e-12);

        let empty = profile(&[], BudgetBand::High, train_eco);
        // mode neutral 0.5, budget miss 0, eco 1
        assert!((content_score(&empty, train, &bands, &carbon, &w) - 1.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn content_ranking_matches_brute_force() {
        let params = crate::synthgen::ScenarioParams {
            n_cities: 3,
            options_per_route: 8,
            ..Default::default()
        };
        let c = crate::synthgen::gen_catalog(&params).unwrap();
        assert!(c.len() >= 50);
        let carbon = CarbonConfig::default();
        let w = ContentWeights::default();
        let p = profile(&[OptionKind::Bus, OptionKind::Train], BudgetBand::Mid, 0.7);
        let got = recommend_content(&p, &c, 50, &w, &carbon);

        let bands = PriceBands::from_catalog(&c);
        let mut oracle: Vec<(f64, String)> = c
            .options()
            .iter()
            .map(|o| (content_score(&p, o, &bands, &carbon, &w), o.id.0.clone()))
            .collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let got_ids: Vec<&str> = got.iter().map(|r| r.option_id.as_str()).collect();
        let want: Vec<&str> = oracle.iter().take(50).map(|x| x.1.as_str()).collect();
        assert_eq!(got_ids, want);
        assert!(recommend_content(&p, &Catalog::empty(), 5, &w, &carbon).is_empty());
    }

    fn rec(id: &str, s: f64, source: Source) -> Recommendation {
        Recommendation {
            option_id: id.into(),
            score: s,
            source,
        }
    }

    #[test]
    fn blend_examples() {
        let cf = vec![rec("a", 5.0, Source::Collaborative), rec("b", 3.0, Source::Collaborative), rec("c", 1.0, Source::Collaborative)];
        let cb = vec![rec("b", 0.9, Source::Content), rec("c", 0.5, Source::Content), rec("d", 0.1, Source::Content)];

        let only_cf: Vec<_> = blend(&cf, &cb, 1.0, 10).into_iter().map(|r| (r.option_id.0, r.score)).collect();
        assert_eq!(&only_cf[..3], &[("a".into(), 1.0), ("b".into(), 0.5), ("c".into(), 0.0)]);
        let only_cb: Vec<_> = blend(&cf, &cb, 0.0, 3).into_iter().map(|r| r.option_id.0).collect();
        assert_eq!(only_cb, ["b", "c", "d"]);

        // lambda 0.5 by hand: cf norm a=1 b=.5 c=0; cb norm b=1 c=.5 d=0
        // a=.5, b=.75, c=.25, d=0
        let half: Vec<_> = blend(&cf, &cb, 0.5, 4).into_iter().map(|r| (r.option_id.0, r.score)).collect();
        assert_eq!(
            half,
            vec![("b".into(), 0.75), ("a".into(), 0.5), ("c".into(), 0.25), ("d".into(), 0.0)]
        );
    }

    proptest! {
        #[test]
        fn similarity_symmetric_and_scale_invariant(
            a in prop::collection::vec(prop::option::of(1u8..=5), 6),
            b in prop::collection::vec(prop::option::of(1u8..=5), 6),
            scale in 0.1f64..10.0,
        ) {
            let u: Vec<Option<f64>> = a.iter().map(|x| x.map(f64::from)).collect();
            let v: Vec<Option<f64>> = b.iter().map(|x| x.map(f64::from)).collect();
            let s1 = cosine_similarity(&u, &v).value;
            let s2 = cosine_similarity(&v, &u).value;
            prop_assert!((s1 - s2).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&s1));
            let scaled: Vec<Option<f64>> = u.iter().map(|x| x.map(|r| r * scale)).collect();
            prop_assert!((cosine_similarity(&scaled, &v).value - s1).abs() < 1e-9);
        }

        #[test]
        fn cf_never_returns_rated_items(
            rows in prop::collection::vec(prop::collection::vec(prop::option::of(1u8..=5), 8), 2..6)
        ) {
            let users: Vec<String> = (0..rows.len()).map(|i| format!("u{i}")).collect();
            let rows: Vec<Vec<Option<f64>>> = rows.into_iter().map(|r| r.into_iter().map(|x| x.map(f64::from)).collect()).collect();
            let m = RatingMatrix::from_rows(users.clone(), ids(8), rows.clone());
            for (ui, u) in users.iter().enumerate() {
                let res = recommend_collaborative(&m, u, 3, 8).unwrap();
                for w in res.recommendations.windows(2) {
                    prop_assert!(rank_order(&w[0], &w[1]) != Ordering::Greater);
                }
                for r in &res.recommendations {
                    let j: usize = r.option_id.0[1..].parse().unwrap();
                    prop_assert!(rows[ui][j].is_none());
                }
            }
        }

        #[test]
        fn blend_respects_dominance(
            cfs in prop::collection::vec(0.0f64..5.0, 5),
            cbs in prop::collection::vec(0.0f64..1.0, 5),
            lambda in 0.0f64..=1.0,
        ) {
            let cf: Vec<_> = cfs.iter().enumerate().map(|(i, s)| rec(&format!("x{i}"), *s, Source::Collaborative)).collect();
            let cb: Vec<_> = cbs.iter().enumerate().map(|(i, s)| rec(&format!("x{i}"), *s, Source::Content)).collect();
            let out = blend(&cf, &cb, lambda, 5);
            let pos = |id: &str| out.iter().position(|r| r.option_id.as_str() == id).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    if i != j && cfs[i] >= cfs[j] && cbs[i] >= cbs[j] {
                        let (a, b) = (format!("x{i}"), format!("x{j}"));
                        let score_a = out[pos(&a)].score;
                        let score_b = out[pos(&b)].score;
                        prop_assert!(score_a >= score_b);
                        if score_a > score_b { prop_assert!(pos(&a) < pos(&b)); }
                    }
                }
            }
        }
    }

    #[test]
    fn matrix_from_profiles() {
        let c = catalog();
        let mut p = profile(&[], BudgetBand::Low, 0.5);
        p.booking_history = vec![Rating { option_id: "t-mid".into(), rating: 4.0 }];
        let m = RatingMatrix::build(&[p], &c);
        let row = m.row("p").unwrap();
        assert_eq!(row.iter().flatten().count(), 1);
        assert_eq!(m.items().len(), c.len());
    }
}
