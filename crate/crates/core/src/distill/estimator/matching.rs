use super::GuessEstimator;

pub(super) const REFERENCE_YEAR: i64 = 2017;
const DATE_MIN_YEAR: i64 = 1000;
const DATE_MAX_YEAR: i64 = 2050;
const MAX_DELTA: i64 = 5;

const L33T_TABLE: &[(char, &[char])] = &[
    ('a', &['4', '@']),
    ('b', &['8']),
    ('c', &['(', '{', '[', '<']),
    ('e', &['3']),
    ('g', &['6', '9']),
    ('i', &['1', '!', '|']),
    ('l', &['1', '|', '7']),
    ('o', &['0']),
    ('s', &['$', '5']),
    ('t', &['+', '7']),
    ('x', &['%']),
    ('z', &['2']),
];

const SHIFTED: &str = "~!@#$%^&*()_+QWERTYUIOP{}|ASDFGHJKL:\"ZXCVBNM<>?";

#[derive(Debug, Clone)]
pub(super) enum Pattern {
    Dictionary {
        rank: u32,
        reversed: bool,
        /// (substituted char, original letter) pairs in use.
        l33t: Vec<(char, char)>,
    },
    Spatial {
        keypad: bool,
        turns: usize,
        shifted_count: usize,
    },
    Repeat {
        base_guesses: f64,
        repeat_count: f64,
    },
    Sequence {
        ascending: bool,
    },
    RecentYear {
        year: i64,
    },
    Date {
        year: i64,
        has_separator: bool,
    },
}

#[derive(Debug, Clone)]
pub(super) struct Match {
    pub i: usize,
    pub j: usize,
    pub token: Vec<char>,
    pub pattern: Pattern,
}

fn lowercase(chars: &[char]) -> Vec<char> {
    chars.iter().flat_map(|c| c.to_lowercase()).collect()
}

fn is_digit(c: char) -> bool {
    c.is_ascii_digit()
}

fn parse_int(chars: &[char]) -> i64 {
    chars.iter().fold(0i64, |acc, c| acc.saturating_mul(10).saturating_add(c.to_digit(10).unwrap_or(0) as i64))
}

fn sort_by_span(matches: &mut [Match]) {
    matches.sort_by_key(|m| (m.i, m.j));
}

pub(super) fn omnimatch(est: &GuessEstimator, password: &[char]) -> Vec<Match> {
    let mut matches = Vec::new();
    matches.extend(dictionary_match(est, password));
    matches.extend(reverse_dictionary_match(est, password));
    matches.extend(l33t_match(est, password));
    matches.extend(spatial_match(est, password));
    matches.extend(repeat_match(est, password));
    matches.extend(sequence_match(password));
    matches.extend(regex_match(password));
    matches.extend(date_match(password));
    sort_by_span(&mut matches);
    matches
}

/// Every substring found in a ranked dictionary, compared case-insensitively.
fn dictionary_match(est: &GuessEstimator, password: &[char]) -> Vec<Match> {
    let lower = lowercase(password);
    let n = password.len();
    let mut out = Vec::new();
    let mut buf = String::new();
    for dict in &est.dictionaries {
        for i in 0..n {
            buf.clear();
            let max_j = (i + dict.max_len()).min(n);
            for j in i..max_j {
                // the lowercased string can be longer than the input for a
                // few code points; index it the way a slice would
                if let Some(&c) = lower.get(j) {
                    buf.push(c);
                } else {
                    break;
                }
                if let Some(rank) = dict.rank(&buf) {
                    out.push(Match {
                        i,
                        j,
                        token: password[i..=j].to_vec(),
                        pattern: Pattern::Dictionary { rank, reversed: false, l33t: Vec::new() },
                    });
                }
            }
        }
    }
    sort_by_span(&mut out);
    out
}

fn reverse_dictionary_match(est: &GuessEstimator, password: &[char]) -> Vec<Match> {
    let reversed: Vec<char> = password.iter().rev().copied().collect();
    let n = password.len();
    let mut out = dictionary_match(est, &reversed);
    for m in &mut out {
        m.token.reverse();
        if let Pattern::Dictionary { reversed, .. } = &mut m.pattern {
            *reversed = true;
        }
        let (i, j) = (n - 1 - m.j, n - 1 - m.i);
        m.i = i;
        m.j = j;
    }
    sort_by_span(&mut out);
    out
}

fn relevant_l33t_subtable(password: &[char]) -> Vec<(char, Vec<char>)> {
    L33T_TABLE
        .iter()
        .filter_map(|(letter, subs)| {
            let relevant: Vec<char> = subs.iter().copied().filter(|s| password.contains(s)).collect();
            (!relevant.is_empty()).then_some((*letter, relevant))
        })
        .collect()
}

/// All substitution maps (l33t char -> letter) consistent with the table,
/// in the order the reference enumeration produces them.
fn enumerate_l33t_subs(table: &[(char, Vec<char>)]) -> Vec<Vec<(char, char)>> {
    // each sub is an ordered list of (l33t char, letter)
    let mut subs: Vec<Vec<(char, char)>> = vec![Vec::new()];
    for (letter, l33t_chars) in table {
        let mut next: Vec<Vec<(char, char)>> = Vec::new();
        for &l33t in l33t_chars {
            for sub in &subs {
                match sub.iter().position(|(c, _)| *c == l33t) {
                    None => {
                        let mut ext = sub.clone();
                        ext.push((l33t, *letter));
                        next.push(ext);
                    }
                    Some(dup) => {
                        let mut alt = sub.clone();
                        alt.remove(dup);
                        alt.push((l33t, *letter));
                        next.push(sub.clone());
                        next.push(alt);
                    }
                }
            }
        }
        // dedup on the sorted (letter, l33t) association list
        let mut seen = std::collections::HashSet::new();
        subs = next
            .into_iter()
            .filter(|sub| {
                let mut assoc: Vec<(char, char)> = sub.iter().map(|(l33t, letter)| (*letter, *l33t)).collect();
                assoc.sort();
                seen.insert(assoc)
            })
            .collect();
    }
    // later entries for the same l33t char overwrite earlier ones, keeping
    // the position of the first
    subs.into_iter()
        .map(|sub| {
            let mut map: Vec<(char, char)> = Vec::new();
            for (l33t, letter) in sub {
                if let Some(e) = map.iter_mut().find(|(c, _)| *c == l33t) {
                    e.1 = letter;
                } else {
                    map.push((l33t, letter));
                }
            }
            map
        })
        .collect()
}

fn l33t_match(est: &GuessEstimator, password: &[char]) -> Vec<Match> {
    let mut out = Vec::new();
    for sub in enumerate_l33t_subs(&relevant_l33t_subtable(password)) {
        if sub.is_empty() {
            break;
        }
        let subbed: Vec<char> = password
            .iter()
            .map(|c| sub.iter().find(|(l33t, _)| l33t == c).map(|(_, letter)| *letter).unwrap_or(*c))
            .collect();
        for mut m in dictionary_match(est, &subbed) {
            let token = password[m.i..=m.j].to_vec();
            let matched_word = lowercase(&subbed[m.i..=m.j]);
            if lowercase(&token) == matched_word {
                continue;
            }
            let used: Vec<(char, char)> = sub.iter().copied().filter(|(l33t, _)| token.contains(l33t)).collect();
            if let Pattern::Dictionary { l33t, .. } = &mut m.pattern {
                *l33t = used;
            }
            m.token = token;
            out.push(m);
        }
    }
    out.retain(|m| m.token.len() > 1);
    sort_by_span(&mut out);
    out
}

fn spatial_match(est: &GuessEstimator, password: &[char]) -> Vec<Match> {
    let mut out = Vec::new();
    for graph in &est.graphs {
        let keyboard = graph.name == "qwerty" || graph.name == "dvorak";
        let n = password.len();
        let mut i = 0usize;
        while i + 1 < n {
            let mut j = i + 1;
            let mut last_direction: Option<usize> = None;
            let mut turns = 0usize;
            let mut shifted_count = usize::from(keyboard && SHIFTED.contains(password[i]));
            loop {
                let prev = password[j - 1];
                let mut found = false;
                if j < n {
                    let cur = password[j];
                    for (direction, adj) in graph.neighbours(prev).iter().enumerate() {
                        let Some(adj) = adj else { continue };
                        if let Some(pos) = adj.iter().position(|&c| c == cur) {
                            found = true;
                            if pos == 1 {
                                shifted_count += 1;
                            }
                            if last_direction != Some(direction) {
                                turns += 1;
                                last_direction = Some(direction);
                            }
                            break;
                        }
                    }
                }
                if found {
                    j += 1;
                } else {
                    if j - i > 2 {
                        out.push(Match {
                            i,
                            j: j - 1,
                            token: password[i..j].to_vec(),
                            pattern: Pattern::Spatial { keypad: !keyboard, turns, shifted_count },
                        });
                    }
                    i = j;
                    break;
                }
            }
        }
    }
    sort_by_span(&mut out);
    out
}

/// Leftmost position at or after `from` where some unit repeats at least
/// twice, scanning unit lengths either longest-first (greedy) or
/// shortest-first (lazy). Returns (start, unit length, total length).
/// Units never span a newline.
fn find_repeat(s: &[char], from: usize, greedy: bool) -> Option<(usize, usize, usize)> {
    let n = s.len();
    for p in from..n {
        let max_unit = s[p..].iter().position(|&c| c == '\n').unwrap_or(n - p).min((n - p) / 2);
        let try_unit = |unit: usize| -> Option<(usize, usize, usize)> {
            if s[p..p + unit] != s[p + unit..p + 2 * unit] {
                return None;
            }
            let mut reps = 2;
            while p + (reps + 1) * unit <= n && s[p..p + unit] == s[p + reps * unit..p + (reps + 1) * unit] {
                reps += 1;
            }
            Some((p, unit, unit * reps))
        };
        let found = if greedy {
            (1..=max_unit).rev().find_map(try_unit)
        } else {
            (1..=max_unit).find_map(try_unit)
        };
        if found.is_some() {
            return found;
        }
    }
    None
}

fn shortest_period(s: &[char]) -> usize {
    let n = s.len();
    (1..=n / 2)
        .find(|&unit| n % unit == 0 && !s[..unit].contains(&'\n') && s.chunks(unit).all(|c| c == &s[..unit]))
        .unwrap_or(n)
}

fn repeat_match(est: &GuessEstimator, password: &[char]) -> Vec<Match> {
    let mut out = Vec::new();
    let mut last = 0usize;
    while last < password.len() {
        let Some(greedy) = find_repeat(password, last, true) else { break };
        let lazy = find_repeat(password, last, false).unwrap_or(greedy);
        let (start, len, base) = if greedy.2 > lazy.2 {
            let whole = &password[greedy.0..greedy.0 + greedy.2];
            let unit = shortest_period(whole);
            (greedy.0, greedy.2, whole[..unit].to_vec())
        } else {
            (lazy.0, lazy.2, password[lazy.0..lazy.0 + lazy.1].to_vec())
        };
        let base_guesses = est.guesses_for(&base);
        out.push(Match {
            i: start,
            j: start + len - 1,
            token: password[start..start + len].to_vec(),
            pattern: Pattern::Repeat { base_guesses, repeat_count: len as f64 / base.len() as f64 },
        });
        last = start + len;
    }
    out
}

fn sequence_match(password: &[char]) -> Vec<Match> {
    let n = password.len();
    if n <= 1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut push = |i: usize, j: usize, delta: i64| {
        if j - i > 1 || delta.abs() == 1 {
            if 0 < delta.abs() && delta.abs() <= MAX_DELTA {
                out.push(Match {
                    i,
                    j,
                    token: password[i..=j].to_vec(),
                    pattern: Pattern::Sequence { ascending: delta > 0 },
                });
            }
        }
    };
    let mut i = 0usize;
    let mut last_delta: Option<i64> = None;
    for k in 1..n {
        let delta = password[k] as i64 - password[k - 1] as i64;
        let last = *last_delta.get_or_insert(delta);
        if delta == last {
            continue;
        }
        let j = k - 1;
        push(i, j, last);
        i = j;
        last_delta = Some(delta);
    }
    if let Some(d) = last_delta {
        push(i, n - 1, d);
    }
    out
}

/// Four-digit years 1900-2019.
fn regex_match(password: &[char]) -> Vec<Match> {
    let mut out = Vec::new();
    let n = password.len();
    let mut p = 0;
    while p + 4 <= n {
        let w = &password[p..p + 4];
        let hit = w.iter().all(|&c| is_digit(c))
            && ((w[0] == '1' && w[1] == '9') || (w[0] == '2' && w[1] == '0' && (w[2] == '0' || w[2] == '1')));
        if hit {
            out.push(Match {
                i: p,
                j: p + 3,
                token: w.to_vec(),
                pattern: Pattern::RecentYear { year: parse_int(w) },
            });
            p += 4;
        } else {
            p += 1;
        }
    }
    out
}

const DATE_SPLITS: &[(usize, &[(usize, usize)])] = &[
    (4, &[(1, 2), (2, 3)]),
    (5, &[(1, 3), (2, 3)]),
    (6, &[(1, 2), (2, 4), (4, 5)]),
    (7, &[(1, 3), (2, 3), (4, 5), (4, 6)]),
    (8, &[(2, 4), (4, 6)]),
];

struct Dmy {
    year: i64,
}

fn map_ints_to_dm(a: i64, b: i64) -> bool {
    [(a, b), (b, a)].iter().any(|&(d, m)| (1..=31).contains(&d) && (1..=12).contains(&m))
}

fn two_to_four_digit_year(year: i64) -> i64 {
    if year > 99 {
        year
    } else if year > 50 {
        year + 1900
    } else {
        year + 2000
    }
}

fn map_ints_to_dmy(ints: [i64; 3]) -> Option<Dmy> {
    if ints[1] > 31 || ints[1] <= 0 {
        return None;
    }
    let (mut over_12, mut over_31, mut under_1) = (0, 0, 0);
    for &v in &ints {
        if (99 < v && v < DATE_MIN_YEAR) || v > DATE_MAX_YEAR {
            return None;
        }
        if v > 31 {
            over_31 += 1;
        }
        if v > 12 {
            over_12 += 1;
        }
        if v <= 0 {
            under_1 += 1;
        }
    }
    if over_31 >= 2 || over_12 == 3 || under_1 >= 2 {
        return None;
    }
    let splits = [(ints[2], (ints[0], ints[1])), (ints[0], (ints[1], ints[2]))];
    for &(y, (a, b)) in &splits {
        if (DATE_MIN_YEAR..=DATE_MAX_YEAR).contains(&y) {
            return map_ints_to_dm(a, b).then_some(Dmy { year: y });
        }
    }
    for &(y, (a, b)) in &splits {
        if map_ints_to_dm(a, b) {
            return Some(Dmy { year: two_to_four_digit_year(y) });
        }
    }
    None
}

fn is_date_separator(c: char) -> bool {
    c.is_whitespace() || matches!(c, '/' | '\\' | '_' | '.' | '-')
}

/// `d{1,4} sep d{1,2} sep d{1,4}` with the same separator twice.
fn parse_separated_date(token: &[char]) -> Option<([i64; 3], char)> {
    let run = |from: usize| token[from..].iter().take_while(|&&c| is_digit(c)).count();
    let a = run(0);
    if !(1..=4).contains(&a) || a >= token.len() {
        return None;
    }
    let sep = token[a];
    if !is_date_separator(sep) {
        return None;
    }
    let b = run(a + 1);
    if !(1..=2).contains(&b) || a + 1 + b >= token.len() || token[a + 1 + b] != sep {
        return None;
    }
    let c_start = a + 2 + b;
    let c = run(c_start);
    if !(1..=4).contains(&c) || c_start + c != token.len() {
        return None;
    }
    Some((
        [
            parse_int(&token[..a]),
            parse_int(&token[a + 1..a + 1 + b]),
            parse_int(&token[c_start..]),
        ],
        sep,
    ))
}

fn date_match(password: &[char]) -> Vec<Match> {
    let n = password.len();
    let mut found: Vec<Match> = Vec::new();
    for i in 0..n.saturating_sub(3) {
        for j in i + 3..i + 8 {
            if j >= n {
                break;
            }
            let token = &password[i..=j];
            if !token.iter().all(|&c| is_digit(c)) {
                continue;
            }
            let splits = DATE_SPLITS.iter().find(|(len, _)| *len == token.len()).map(|(_, s)| *s).unwrap_or(&[]);
            let best = splits
                .iter()
                .filter_map(|&(k, l)| map_ints_to_dmy([parse_int(&token[..k]), parse_int(&token[k..l]), parse_int(&token[l..])]))
                .fold(None::<Dmy>, |best, cand| match best {
                    Some(b) if (cand.year - REFERENCE_YEAR).abs() >= (b.year - REFERENCE_YEAR).abs() => Some(b),
                    _ => Some(cand),
                });
            if let Some(dmy) = best {
                found.push(Match {
                    i,
                    j,
                    token: token.to_vec(),
                    pattern: Pattern::Date { year: dmy.year, has_separator: false },
                });
            }
        }
    }
    for i in 0..n.saturating_sub(5) {
        for j in i + 5..i + 10 {
            if j >= n {
                break;
            }
            let token = &password[i..=j];
            let Some((ints, _sep)) = parse_separated_date(token) else { continue };
            if let Some(dmy) = map_ints_to_dmy(ints) {
                found.push(Match {
                    i,
                    j,
                    token: token.to_vec(),
                    pattern: Pattern::Date { year: dmy.year, has_separator: true },
                });
            }
        }
    }
    let spans: Vec<(usize, usize)> = found.iter().map(|m| (m.i, m.j)).collect();
    let mut out: Vec<Match> = found
        .into_iter()
        .filter(|m| !spans.iter().any(|&(i, j)| (i, j) != (m.i, m.j) && i <= m.i && j >= m.j))
        .collect();
    sort_by_span(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn sequence_splits_on_delta_change() {
        let m = sequence_match(&chars("abcdb975zy"));
        let spans: Vec<_> = m.iter().map(|m| (m.i, m.j)).collect();
        assert_eq!(spans, vec![(0, 3), (5, 7), (8, 9)]);
    }

    #[test]
    fn repeat_prefers_greedy_when_longer() {
        let est = GuessEstimator::bundled();
        let m = repeat_match(est, &chars("aabaab"));
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].i, m[0].j), (0, 5));
        match m[0].pattern {
            Pattern::Repeat { repeat_count, .. } => assert_eq!(repeat_count, 2.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn dates_drop_submatches() {
        let m = date_match(&chars("2015_06_04"));
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].i, m[0].j), (0, 9));
    }

    #[test]
    fn l33t_subs_enumerate_alternatives() {
        let table = relevant_l33t_subtable(&chars("p4$$1|"));
        let subs = enumerate_l33t_subs(&table);
        // '1' and '|' are ambiguous between i and l
        assert!(subs.len() >= 2);
        assert!(subs.iter().all(|s| s.iter().any(|(c, _)| *c == '4')));
    }

    #[test]
    fn spatial_finds_keyboard_walks() {
        let est = GuessEstimator::bundled();
        let m = spatial_match(est, &chars("qwerty"));
        assert!(m.iter().any(|m| m.i == 0 && m.j == 5));
    }
}
