use serde::{Deserialize, Serialize};

use super::{LineIndex, Span};

const FENCE: &str = "```";

/// Label used for spans that point into a model completion.
pub const COMPLETION_LABEL: &str = "<completion>";

/// A triple-backtick fenced region of a completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeBlock {
    pub language_tag: String,
    pub body: String,
    /// False when the text ended before a closing fence.
    pub complete: bool,
    pub span_in_completion: Span,
}

impl CodeBlock {
    /// Blocks tagged `python`, `py`, or untagged are solution candidates.
    pub fn is_python_candidate(&self) -> bool {
        let tag = self.language_tag.to_ascii_lowercase();
        matches!(tag.as_str(), "" | "python" | "py")
    }
}

/// Every fenced block in `text`, in order of appearance.
///
/// An opening fence is three backticks followed by an optional language tag
/// and a newline; an info string containing a backtick is not a fence. The
/// block closes at the first later line that begins with three backticks.
/// Text after a closing fence on the same line is scanned for further
/// openings. A block still open at end of text is returned incomplete.
pub fn extract_code_blocks(text: &str) -> Vec<CodeBlock> {
    let lines = LineIndex::new(text);
    let line_of = |offset: usize| lines.position(text, offset);
    let mut blocks = Vec::new();
    let mut pos = 0;

    while let Some(found) = text[pos..].find(FENCE) {
        let open = pos + found;
        let after = open + FENCE.len();
        let info_end = text[after..].find('\n').map_or(text.len(), |i| after + i);
        let info = &text[after..info_end];
        if info.contains('`') {
            pos = after + info.find('`').unwrap_or(0);
            pos += text[pos..].len() - text[pos..].trim_start_matches('`').len();
            continue;
        }
        let language_tag = info.split_whitespace().next().unwrap_or("").to_string();
        let body_start = (info_end + 1).min(text.len());

        let mut close = None;
        let mut line_start = body_start;
        while line_start < text.len() {
            let line_end = text[line_start..].find('\n').map_or(text.len(), |i| line_start + i);
            let line = &text[line_start..line_end];
            let indent = line.len() - line.trim_start().len();
            if line[indent..].starts_with(FENCE) {
                close = Some((line_start, line_start + indent + FENCE.len()));
                break;
            }
            line_start = line_end + 1;
        }

        let (open_line, open_col) = line_of(open);
        let (body, complete, end_offset, next) = match close {
            Some((close_line_start, close_end)) => {
                let body_end = close_line_start.saturating_sub(1).max(body_start);
                (&text[body_start..body_end], true, close_end, close_end)
            }
            None => (&text[body_start..], false, text.len(), text.len()),
        };
        let (end_line, end_col) = line_of(end_offset);
        blocks.push(CodeBlock {
            language_tag,
            body: body.to_string(),
            complete,
            span_in_completion: Span::new(COMPLETION_LABEL, open_line, open_col, end_line, end_col),
        });
        pos = next;
    }
    blocks
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_well_formed_fence() {
        let blocks = extract_code_blocks("```python\nx=1\n```");
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].language_tag, "python");
        assert_eq!(blocks[0].body, "x=1");
        assert!(blocks[0].complete);
        assert_eq!(blocks[0].span_in_completion.start_line, 1);
        assert_eq!(blocks[0].span_in_completion.end_line, 3);
    }

    #[test]
    fn no_fences() {
        assert!(extract_code_blocks("text with no fences").is_empty());
    }

    #[test]
    fn two_blocks_in_order() {
        let blocks = extract_code_blocks("```python\nx=1\n``` and ```python\ny=2\n```");
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].body, "x=1");
        assert_eq!(blocks[1].body, "y=2");
        assert!(blocks.iter().all(|b| b.complete));
    }

    #[test]
    fn unterminated_block_is_incomplete() {
        let blocks = extract_code_blocks("Here:\n```python\ndef f():\n    return 1\n");
        assert_eq!(blocks.len(), 1);
        assert!(!blocks[0].complete);
        assert_eq!(blocks[0].body, "def f():\n    return 1\n");
    }

    #[test]
    fn untagged_and_foreign_tags() {
        let blocks = extract_code_blocks("```\na\n```\n```bash\nls\n```\n");
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].language_tag, "");
        assert!(blocks[0].is_python_candidate());
        assert_eq!(blocks[1].language_tag, "bash");
        assert!(!blocks[1].is_python_candidate());
    }

    #[test]
    fn multiline_body_preserved() {
        let text = "intro\n```py\nimport os\n\nprint(os.sep)\n```\noutro\n";
        let blocks = extract_code_blocks(text);
        assert_eq!(blocks[0].body, "import os\n\nprint(os.sep)");
        assert_eq!(blocks[0].span_in_completion.start_line, 2);
        assert_eq!(blocks[0].span_in_completion.end_line, 6);
    }

    #[test]
    fn empty_body() {
        let blocks = extract_code_blocks("```python\n```");
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].body, "");
        assert!(blocks[0].complete);
    }

    #[test]
    fn inline_triple_backticks_are_not_fences() {
        assert!(extract_code_blocks("use ```x``` inline").is_empty());
    }

    proptest! {
        #[test]
        fn opening_fences_bound_block_count(text in "[a-z`\n ]{0,80}") {
            let blocks = extract_code_blocks(&text);
            let fences = text.matches(FENCE).count();
            let complete = blocks.iter().filter(|b| b.complete).count();
            prop_assert!(blocks.len() <= fences);
            // each complete block consumes one opening and one closing fence
            prop_assert!(blocks.len() + complete <= fences);
            // only the last block can be unterminated
            for b in blocks.iter().rev().skip(1) {
                prop_assert!(b.complete);
            }
        }

        #[test]
        fn generated_blocks_round_trip(bodies in prop::collection::vec("[a-z =0-9]{0,12}", 0..5)) {
            let text: String = bodies.iter().map(|b| format!("```python\n{b}\n```\n")).collect();
            let blocks = extract_code_blocks(&text);
            prop_assert_eq!(blocks.len(), bodies.len());
            for (block, body) in blocks.iter().zip(&bodies) {
                prop_assert_eq!(&block.body, body);
                prop_assert!(block.complete);
            }
        }
    }
}
