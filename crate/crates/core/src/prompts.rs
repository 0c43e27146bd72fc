//! Versioned prompt templates for the generation service.

pub const PROMPT_VERSION: &str = "v1";

pub const EXTRACT: &str = include_str!("../assets/extract_prompt_v1.txt");
pub const OUTLINE: &str = include_str!("../assets/outline_prompt_v1.txt");
pub const QUERY: &str = include_str!("../assets/query_prompt_v1.txt");

/// Substitutes `{name}` placeholders in one pass; values are inserted
/// verbatim and never re-scanned. Unknown placeholders are left as-is.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_substitutes_once() {
        let s = render("{a} and {b} {c}", &[("a", "{b}"), ("b", "x")]);
        assert_eq!(s, "{b} and x {c}");
    }

    #[test]
    fn templates_have_their_placeholders() {
        for key in ["{query}", "{paper_id}", "{passages}", "{n_refs}"] {
            assert!(EXTRACT.contains(key));
        }
        for key in ["{title}", "{abstract}", "{passage}", "{outline}", "{sentence}"] {
            assert!(QUERY.contains(key));
        }
    }
}
