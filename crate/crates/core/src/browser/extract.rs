use scraper::{ElementRef, Html, Selector};

const SKIPPED_TAGS: &[&str] = &[
    "script", "style", "noscript", "nav", "header", "footer", "aside", "form", "iframe", "svg",
    "button", "template", "head", "select", "figure",
];

/// Substrings of class/id values marking navigation, reference lists and
/// other page chrome.
const SKIPPED_MARKERS: &[&str] = &[
    "nav",
    "menu",
    "footer",
    "sidebar",
    "breadcrumb",
    "reference",
    "citation",
    "cookie",
    "share",
    "advert",
    "banner",
    "related",
];

const BLOCK_TAGS: &[&str] = &[
    "p",
    "div",
    "li",
    "ul",
    "ol",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "br",
    "tr",
    "table",
    "section",
    "article",
    "main",
    "blockquote",
    "pre",
    "dd",
    "dt",
    "dl",
    "hr",
];

const ROOT_SELECTORS: &[&str] = &["article", "main", "[role=main]", "#content", "body"];

/// Extracts the readable body of an article page: the first of
/// `article`, `main`, `#content`, `body`, minus scripts, navigation,
/// reference sections and similar chrome. One paragraph per line.
pub fn extract_main_text(html: &str) -> String {
    let doc = Html::parse_document(html);
    let root = ROOT_SELECTORS
        .iter()
        .find_map(|s| {
            doc.select(&Selector::parse(s).expect("static selector"))
                .next()
        })
        .unwrap_or_else(|| doc.root_element());
    let mut out = String::new();
    walk(root, &mut out);
    out.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn heading_level(name: &str) -> Option<u8> {
    match name.as_bytes() {
        [b'h', d @ b'1'..=b'6'] => Some(d - b'0'),
        _ => None,
    }
}

fn is_chrome(el: &ElementRef) -> bool {
    let v = el.value();
    if SKIPPED_TAGS.contains(&v.name()) {
        return true;
    }
    let attrs = [v.attr("class").unwrap_or(""), v.id().unwrap_or("")];
    attrs.iter().any(|a| {
        let a = a.to_ascii_lowercase();
        SKIPPED_MARKERS.iter().any(|m| a.contains(m))
    })
}

fn is_reference_heading(el: &ElementRef) -> bool {
    let text = el.text().collect::<String>().trim().to_lowercase();
    matches!(
        text.as_str(),
        "references" | "bibliography" | "further reading"
    )
}

fn walk(el: ElementRef, out: &mut String) {
    let name = el.value().name();
    let block = BLOCK_TAGS.contains(&name);
    if block {
        out.push('\n');
    }
    // set while inside a "References" section: skip siblings until a
    // heading of the same or higher rank
    let mut skipping_from: Option<u8> = None;
    for child in el.children() {
        if let Some(child_el) = ElementRef::wrap(child) {
            let level = heading_level(child_el.value().name());
            if let (Some(skip), Some(l)) = (skipping_from, level) {
                if l <= skip {
                    skipping_from = None;
                }
            }
            if let Some(l) = level {
                if is_reference_heading(&child_el) {
                    skipping_from = Some(l);
                }
            }
            if skipping_from.is_some() || is_chrome(&child_el) {
                continue;
            }
            walk(child_el, out);
        } else if skipping_from.is_none() {
            if let Some(text) = child.value().as_text() {
                out.push_str(text);
            }
        }
    }
    if block {
        out.push('\n');
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_chrome_and_keeps_paragraphs() {
        let html = r#"<html><head><title>T</title><script>var x = 1;</script></head>
            <body><header>Site header</header><nav class="top">Home | Cases</nav>
            <article><h1>Undifferentiated embryonal sarcoma</h1>
            <p>A rare   malignant <b>mesenchymal</b> tumour.</p>
            <div class="share-buttons">Share this</div>
            <p>Seen in children aged 6-10 years.</p>
            <h2>References</h2><ol><li>Author A. Journal. 2001.</li></ol>
            <h2>Imaging</h2><p>Cystic on CT.</p>
            </article><footer>Copyright</footer></body></html>"#;
        assert_eq!(
            extract_main_text(html),
            "Undifferentiated embryonal sarcoma\nA rare malignant mesenchymal tumour.\nSeen in children aged 6-10 years.\nImaging\nCystic on CT."
        );
    }

    #[test]
    fn reference_lists_by_class_are_dropped() {
        let html = r#"<body><main><p>Body text.</p><div class="ref-list references"><p>Ref 1</p></div></main></body>"#;
        assert_eq!(extract_main_text(html), "Body text.");
    }

    #[test]
    fn falls_back_to_body_and_handles_empty_pages() {
        assert_eq!(
            extract_main_text("<body><p>Plain</p><script>x</script></body>"),
            "Plain"
        );
        assert_eq!(extract_main_text(""), "");
        assert_eq!(extract_main_text("<body><nav>menu</nav></body>"), "");
    }
}
