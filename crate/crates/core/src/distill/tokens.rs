/// Counts tokens for budgeting and cost accounting.
pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Four characters per token, rounded up.
#[derive(Debug, Clone, Copy, Default)]
pub struct ApproxTokenizer;

impl Tokenizer for ApproxTokenizer {
    fn count(&self, text: &str) -> usize {
        text.chars().count().div_ceil(4)
    }
}

pub fn count_tokens(text: &str, tokenizer: &dyn Tokenizer) -> usize {
    tokenizer.count(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceiling_rule() {
        let t = ApproxTokenizer;
        assert_eq!(count_tokens("", &t), 0);
        assert_eq!(count_tokens("abcdefgh", &t), 2);
        assert_eq!(count_tokens("abcdefghi", &t), 3);
        assert_eq!(count_tokens("日本語", &t), 1);
    }
}
