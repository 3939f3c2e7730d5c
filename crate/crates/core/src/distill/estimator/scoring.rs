use super::matching::{Match, Pattern, REFERENCE_YEAR};
use super::GuessEstimator;

const BRUTEFORCE_CARDINALITY: f64 = 10.0;
const MIN_GUESSES_BEFORE_GROWING_SEQUENCE: f64 = 10000.0;
const MIN_SUBMATCH_GUESSES_SINGLE_CHAR: f64 = 10.0;
const MIN_SUBMATCH_GUESSES_MULTI_CHAR: f64 = 50.0;
const MIN_YEAR_SPACE: i64 = 20;

fn n_choose_k(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    if k == 0 {
        return 1.0;
    }
    let mut n = n as f64;
    let mut r = 1.0;
    for d in 1..=k {
        r *= n;
        r /= d as f64;
        n -= 1.0;
    }
    r
}

fn factorial(l: usize) -> f64 {
    (1..=l).map(|x| x as f64).product()
}

/// One entry of the dynamic program: the best length-`len` sequence ending
/// at some position.
#[derive(Clone, Copy)]
struct Best {
    len: usize,
    g: f64,
    pi: f64,
    last_is_bruteforce: bool,
}

/// Minimum over non-overlapping match sequences covering `password` of
/// `l! * prod(guesses) + D^(l-1)`, with gaps charged as brute force.
pub(super) fn most_guessable(est: &GuessEstimator, password: &[char], matches: &[Match]) -> f64 {
    let n = password.len();
    if n == 0 {
        return 1.0;
    }
    let mut by_end: Vec<Vec<&Match>> = vec![Vec::new(); n];
    for m in matches {
        by_end[m.j].push(m);
    }
    for list in &mut by_end {
        list.sort_by_key(|m| m.i);
    }

    // optimal[k] keeps insertion order so ties resolve like the reference
    let mut optimal: Vec<Vec<Best>> = vec![Vec::new(); n];

    let update = |optimal: &mut Vec<Vec<Best>>, i: usize, k: usize, guesses: f64, len: usize, bruteforce: bool| {
        let mut pi = guesses;
        if len > 1 {
            let prev = optimal[i - 1].iter().find(|b| b.len == len - 1).map(|b| b.pi).unwrap_or(f64::INFINITY);
            pi *= prev;
        }
        let g = factorial(len) * pi + MIN_GUESSES_BEFORE_GROWING_SEQUENCE.powi(len as i32 - 1);
        if optimal[k].iter().any(|b| b.len <= len && b.g <= g) {
            return;
        }
        let entry = Best { len, g, pi, last_is_bruteforce: bruteforce };
        match optimal[k].iter_mut().find(|b| b.len == len) {
            Some(b) => *b = entry,
            None => optimal[k].push(entry),
        }
    };

    for k in 0..n {
        for m in &by_end[k] {
            let guesses = estimate_guesses(est, m, n);
            if m.i > 0 {
                let lens: Vec<usize> = optimal[m.i - 1].iter().map(|b| b.len).collect();
                for l in lens {
                    update(&mut optimal, m.i, k, guesses, l + 1, false);
                }
            } else {
                update(&mut optimal, 0, k, guesses, 1, false);
            }
        }
        // bruteforce spanning the whole prefix, then appended to each
        // sequence ending just before i
        update(&mut optimal, 0, k, bruteforce_guesses(k + 1, n), 1, true);
        for i in 1..=k {
            let guesses = bruteforce_guesses(k - i + 1, n);
            let prev: Vec<(usize, bool)> = optimal[i - 1].iter().map(|b| (b.len, b.last_is_bruteforce)).collect();
            for (l, last_bf) in prev {
                if last_bf {
                    continue;
                }
                update(&mut optimal, i, k, guesses, l + 1, true);
            }
        }
    }

    optimal[n - 1].iter().map(|b| b.g).fold(f64::INFINITY, f64::min)
}

fn min_guesses(token_len: usize, password_len: usize) -> f64 {
    if token_len < password_len {
        if token_len == 1 {
            MIN_SUBMATCH_GUESSES_SINGLE_CHAR
        } else {
            MIN_SUBMATCH_GUESSES_MULTI_CHAR
        }
    } else {
        1.0
    }
}

fn bruteforce_guesses(token_len: usize, password_len: usize) -> f64 {
    let guesses = BRUTEFORCE_CARDINALITY.powi(token_len as i32);
    let floor = if token_len == 1 {
        MIN_SUBMATCH_GUESSES_SINGLE_CHAR + 1.0
    } else {
        MIN_SUBMATCH_GUESSES_MULTI_CHAR + 1.0
    };
    guesses.max(floor).max(min_guesses(token_len, password_len))
}

fn estimate_guesses(est: &GuessEstimator, m: &Match, password_len: usize) -> f64 {
    let token = &m.token;
    let raw = match &m.pattern {
        Pattern::Dictionary { rank, reversed, l33t } => {
            let reversed = if *reversed { 2.0 } else { 1.0 };
            *rank as f64 * uppercase_variations(token) * l33t_variations(token, l33t) * reversed
        }
        Pattern::Spatial { keypad, turns, shifted_count } => spatial_guesses(est, token.len(), *keypad, *turns, *shifted_count),
        Pattern::Repeat { base_guesses, repeat_count } => base_guesses * repeat_count,
        Pattern::Sequence { ascending } => {
            let first = token[0];
            let mut base = if matches!(first, 'a' | 'A' | 'z' | 'Z' | '0' | '1' | '9') {
                4.0
            } else if first.is_ascii_digit() {
                10.0
            } else {
                26.0
            };
            if !ascending {
                base *= 2.0;
            }
            base * token.len() as f64
        }
        Pattern::RecentYear { year } => (year - REFERENCE_YEAR).abs().max(MIN_YEAR_SPACE) as f64,
        Pattern::Date { year, has_separator } => {
            let space = (year - REFERENCE_YEAR).abs().max(MIN_YEAR_SPACE) as f64;
            let g = space * 365.0;
            if *has_separator {
                g * 4.0
            } else {
                g
            }
        }
    };
    raw.max(min_guesses(token.len(), password_len))
}

fn spatial_guesses(est: &GuessEstimator, len: usize, keypad: bool, turns: usize, shifted: usize) -> f64 {
    let (s, d) = if keypad {
        (est.keypad_starting_positions, est.keypad_average_degree)
    } else {
        (est.keyboard_starting_positions, est.keyboard_average_degree)
    };
    let mut guesses = 0.0;
    for i in 2..=len {
        let possible_turns = turns.min(i - 1) + 1;
        for j in 1..possible_turns {
            guesses += n_choose_k(i - 1, j - 1) * s * d.powi(j as i32);
        }
    }
    if shifted > 0 {
        let unshifted = len - shifted;
        if unshifted == 0 {
            guesses *= 2.0;
        } else {
            let variations: f64 = (1..=shifted.min(unshifted)).map(|i| n_choose_k(shifted + unshifted, i)).sum();
            guesses *= variations;
        }
    }
    guesses
}

fn uppercase_variations(word: &[char]) -> f64 {
    let all_lower = word.iter().all(|c| !c.is_ascii_uppercase());
    let lowered: Vec<char> = word.iter().flat_map(|c| c.to_lowercase()).collect();
    if all_lower || lowered.as_slice() == word {
        return 1.0;
    }
    let n = word.len();
    let start_upper = n >= 2 && word[0].is_ascii_uppercase() && word[1..].iter().all(|c| !c.is_ascii_uppercase());
    let end_upper = n >= 2 && word[n - 1].is_ascii_uppercase() && word[..n - 1].iter().all(|c| !c.is_ascii_uppercase());
    let all_upper = word.iter().all(|c| !c.is_ascii_lowercase());
    if start_upper || end_upper || all_upper {
        return 2.0;
    }
    let upper = word.iter().filter(|c| c.is_uppercase()).count();
    let lower = word.iter().filter(|c| c.is_lowercase()).count();
    (1..=upper.min(lower)).map(|i| n_choose_k(upper + lower, i)).sum()
}

fn l33t_variations(token: &[char], subs: &[(char, char)]) -> f64 {
    if subs.is_empty() {
        return 1.0;
    }
    let lowered: Vec<char> = token.iter().flat_map(|c| c.to_lowercase()).collect();
    let mut variations = 1.0;
    for &(subbed, unsubbed) in subs {
        let s = lowered.iter().filter(|&&c| c == subbed).count();
        let u = lowered.iter().filter(|&&c| c == unsubbed).count();
        if s == 0 || u == 0 {
            variations *= 2.0;
        } else {
            let p = s.min(u);
            variations *= (1..=p).map(|i| n_choose_k(u + s, i)).sum::<f64>();
        }
    }
    variations
}
