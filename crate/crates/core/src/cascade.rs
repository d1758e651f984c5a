//! Per-message cascades over the action log.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use crate::corpus::{ActionRecord, Corpus, MessageId, UserId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cascade {
    pub message_id: MessageId,
    /// Sorted by `(time, user_id, tweet_id)`.
    pub actions: Vec<ActionRecord>,
    pub is_viral: bool,
    /// Index of the `theta`-th action when viral.
    pub viral_point_index: Option<usize>,
    pub key_users: BTreeSet<UserId>,
    /// Position of each participant's earliest action in `actions`.
    first_adoption: HashMap<UserId, usize>,
}

impl Cascade {
    /// Builds one cascade from the actions of a single message.
    pub fn from_actions(mut actions: Vec<ActionRecord>, theta: usize) -> Cascade {
        assert!(!actions.is_empty(), "a cascade holds at least one action");
        actions.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
        let message_id = actions[0].message_id.clone();
        let mut first_adoption = HashMap::new();
        for (idx, a) in actions.iter().enumerate() {
            first_adoption.entry(a.user_id.clone()).or_insert(idx);
        }
        let is_viral = actions.len() >= theta;
        let (viral_point_index, key_users) = if is_viral {
            let keys = actions[..theta]
                .iter()
                .map(|a| a.user_id.clone())
                .collect();
            (Some(theta - 1), keys)
        } else {
            (None, BTreeSet::new())
        };
        Cascade {
            message_id,
            actions,
            is_viral,
            viral_point_index,
            key_users,
            first_adoption,
        }
    }

    pub fn size(&self) -> usize {
        self.actions.len()
    }

    pub fn participates(&self, user: &str) -> bool {
        self.first_adoption.contains_key(user)
    }

    /// Index of the user's earliest action, if any.
    pub fn first_adoption(&self, user: &str) -> Option<usize> {
        self.first_adoption.get(user).copied()
    }

    /// Participants ordered by first adoption.
    pub fn participants(&self) -> Vec<&str> {
        let mut users: Vec<(&str, usize)> = self
            .first_adoption
            .iter()
            .map(|(u, &i)| (u.as_str(), i))
            .collect();
        users.sort_by_key(|&(_, i)| i);
        users.into_iter().map(|(u, _)| u).collect()
    }
}

/// Groups the corpus actions by message; cascades come out in message-id
/// order.
pub fn build_cascades(corpus: &Corpus, theta: usize) -> Vec<Cascade> {
    cascades_from_actions(corpus.actions(), theta)
}

pub fn cascades_from_actions(actions: Vec<ActionRecord>, theta: usize) -> Vec<Cascade> {
    assert!(theta >= 2, "theta must be at least 2");
    let mut groups: BTreeMap<MessageId, Vec<ActionRecord>> = BTreeMap::new();
    for a in actions {
        groups.entry(a.message_id.clone()).or_default().push(a);
    }
    groups
        .into_par_iter()
        .map(|(_, acts)| Cascade::from_actions(acts, theta))
        .collect()
}

/// `(size, frequency)` pairs for cascades of at least `min_size` actions,
/// ascending by size.
pub fn cascade_size_histogram(cascades: &[Cascade], min_size: usize) -> Vec<(usize, usize)> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for c in cascades.iter().filter(|c| c.size() >= min_size) {
        *counts.entry(c.size()).or_default() += 1;
    }
    counts.into_iter().collect()
}

/// True iff both users take part and `i` adopted strictly before `j`.
pub fn precedes(cascade: &Cascade, i: &str, j: &str) -> bool {
    match (cascade.first_adoption(i), cascade.first_adoption(j)) {
        (Some(a), Some(b)) => a < b,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn act(user: &str, msg: &str, time: i64, id: &str) -> ActionRecord {
        ActionRecord {
            user_id: user.into(),
            message_id: msg.into(),
            time,
            tweet_id: id.into(),
        }
    }

    fn sized(msg: &str, n: usize) -> Vec<ActionRecord> {
        (0..n)
            .map(|k| act(&format!("u{k:03}"), msg, k as i64, &format!("{msg}-{k}")))
            .collect()
    }

    #[test]
    fn below_threshold_is_not_viral() {
        let c = Cascade::from_actions(sized("m", 19), 20);
        assert!(!c.is_viral);
        assert!(c.key_users.is_empty());
        assert_eq!(c.viral_point_index, None);
    }

    #[test]
    fn empty_log_gives_no_cascades() {
        assert!(cascades_from_actions(Vec::new(), 20).is_empty());
    }

    #[test]
    fn key_users_follow_tie_break_order() {
        // 25 distinct users; times collide in pairs so user id decides.
        let mut acts: Vec<ActionRecord> = (0..25)
            .map(|k| act(&format!("u{:02}", 24 - k), "m", (k / 2) as i64, &format!("t{k}")))
            .collect();
        acts.reverse();
        let c = Cascade::from_actions(acts, 20);
        assert!(c.is_viral);
        assert_eq!(c.viral_point_index, Some(19));
        // Time k/2 for user 24-k: sorted order is time asc then id asc.
        let mut expected: Vec<(i64, String)> = (0..25)
            .map(|k| ((k / 2) as i64, format!("u{:02}", 24 - k)))
            .collect();
        expected.sort();
        let want: BTreeSet<UserId> = expected[..20].iter().map(|(_, u)| u.clone()).collect();
        assert_eq!(c.key_users, want);
        assert!(!c.key_users.contains("u00"));
        assert!(!c.key_users.contains("u01"));
    }

    #[test]
    fn repeat_actions_count_once() {
        let mut acts = sized("m", 3);
        acts.push(act("u000", "m", 10, "late"));
        let c = Cascade::from_actions(acts, 3);
        assert!(c.is_viral);
        assert_eq!(c.size(), 4);
        assert_eq!(c.key_users.len(), 3);
        assert_eq!(c.first_adoption("u000"), Some(0));
    }

    #[test]
    fn histogram_counts_and_filters() {
        let cs: Vec<Cascade> = [3, 3, 5]
            .iter()
            .enumerate()
            .map(|(i, &n)| Cascade::from_actions(sized(&format!("m{i}"), n), 20))
            .collect();
        assert_eq!(cascade_size_histogram(&cs, 1), vec![(3, 2), (5, 1)]);
        assert_eq!(cascade_size_histogram(&cs, 4), vec![(5, 1)]);
    }

    #[test]
    fn precedence_rules() {
        let c = Cascade::from_actions(
            vec![
                act("i", "m", 1, "a"),
                act("j", "m", 5, "b"),
                act("p", "m", 4, "c"),
                act("q", "m", 4, "d"),
            ],
            20,
        );
        assert!(precedes(&c, "i", "j"));
        assert!(!precedes(&c, "j", "i"));
        assert!(!precedes(&c, "absent", "j"));
        assert!(precedes(&c, "p", "q"));
        assert!(!precedes(&c, "q", "p"));
        assert!(!precedes(&c, "i", "i"));
    }

    proptest! {
        #[test]
        fn cascade_invariants(
            raw in prop::collection::vec((0u8..8, 0u8..5, 0i64..20), 0..80),
            theta in 2usize..6,
        ) {
            let mut seen = BTreeSet::new();
            let acts: Vec<ActionRecord> = raw
                .into_iter()
                .enumerate()
                .filter(|(_, (u, m, t))| seen.insert((*u, *m, *t)))
                .map(|(k, (u, m, t))| act(&format!("u{u}"), &format!("m{m}"), t, &format!("t{k:03}")))
                .collect();
            let n = acts.len();
            let cs = cascades_from_actions(acts, theta);
            prop_assert_eq!(cs.iter().map(Cascade::size).sum::<usize>(), n);
            for c in &cs {
                prop_assert!(c.actions.windows(2).all(|w| w[0].order_key() <= w[1].order_key()));
                prop_assert_eq!(c.is_viral, c.size() >= theta);
                prop_assert!(c.key_users.len() <= theta);
                for k in &c.key_users {
                    prop_assert!(c.participates(k));
                }
                let parts = c.participants();
                for a in &parts {
                    for b in &parts {
                        prop_assert!(!(precedes(c, a, b) && precedes(c, b, a)));
                    }
                }
            }
            let hist = cascade_size_histogram(&cs, 2);
            prop_assert_eq!(
                hist.iter().map(|&(_, f)| f).sum::<usize>(),
                cs.iter().filter(|c| c.size() >= 2).count()
            );
        }
    }
}
