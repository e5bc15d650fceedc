//! Output-format checks: emitted SVG is well-formed XML and emitted DOT
//! follows the digraph statement grammar.

use quick_xml::events::Event;
use quick_xml::Reader;
use rulemap_core::metromap::{MetroLine, MetroMap};
use rulemap_core::render::{find_interrelations, render_dot, render_svg};
use rulemap_core::rules::SimpleRule;
use rulemap_core::AttributeToken;

fn chain_line(stops: &[&str]) -> MetroLine {
    MetroLine::new(
        stops
            .windows(2)
            .map(|w| SimpleRule {
                antecedent: AttributeToken::new(w[0]).unwrap(),
                consequent: AttributeToken::new(w[1]).unwrap(),
                lift: 1.25,
            })
            .collect(),
    )
    .unwrap()
}

fn sample_map() -> MetroMap {
    MetroMap::new(vec![
        chain_line(&["at14_s", "at8_c", "at20_p", "at1_p"]),
        chain_line(&["at6_n", "at8_c", "at13_s", "at1_e"]),
        chain_line(&["at2_x", "at13_s", "at1_e2"]),
    ])
}

#[test]
fn svg_is_well_formed_xml() {
    let svg = render_svg(&sample_map()).unwrap();
    let mut reader = Reader::from_str(&svg);
    let mut depth = 0i32;
    let mut elements = 0usize;
    loop {
        match reader.read_event() {
            Ok(Event::Eof) => break,
            Ok(Event::Start(_)) => {
                depth += 1;
                elements += 1;
            }
            Ok(Event::End(_)) => depth -= 1,
            Ok(Event::Empty(_)) => elements += 1,
            Ok(_) => {}
            Err(e) => panic!("SVG is not well-formed XML: {e}"),
        }
    }
    assert_eq!(depth, 0, "all elements closed");
    assert!(elements > 10);
}

#[test]
fn svg_escapes_special_characters_in_labels() {
    let map = MetroMap::new(vec![chain_line(&["q_\"x\"", "r_<y>"])]);
    let svg = render_svg(&map).unwrap();
    assert!(svg.contains("&quot;x&quot;"));
    assert!(svg.contains("&lt;y&gt;"));
    let mut reader = Reader::from_str(&svg);
    loop {
        match reader.read_event() {
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(e) => panic!("escaped SVG is not well-formed XML: {e}"),
        }
    }
}

#[test]
fn dot_follows_the_statement_grammar() {
    let dot = render_dot(&sample_map());
    let mut lines = dot.lines();
    assert_eq!(lines.next(), Some("digraph metromap {"));
    let mut saw_close = false;
    for line in lines {
        if line == "}" {
            saw_close = true;
            continue;
        }
        assert!(!saw_close, "content after closing brace");
        let statement = line.trim();
        assert!(
            statement.ends_with(';') || statement.ends_with("];"),
            "statement missing terminator: {statement}"
        );
        // Node ids are always quoted; quotes must balance.
        assert_eq!(statement.matches('"').count() % 2, 0);
    }
    assert!(saw_close);
    assert_eq!(dot.matches('{').count(), dot.matches('}').count());
}

#[test]
fn interrelations_permute_with_the_lines() {
    let map = sample_map();
    let base = find_interrelations(&map);

    let permuted = MetroMap::new(vec![
        map.lines[2].clone(),
        map.lines[0].clone(),
        map.lines[1].clone(),
    ]);
    let moved = find_interrelations(&permuted);

    // Old index i becomes position (i + 1) % 3 under this rotation.
    let translate = |indices: &[usize]| -> Vec<usize> {
        let mut out: Vec<usize> = indices.iter().map(|&i| (i + 1) % 3).collect();
        out.sort_unstable();
        out
    };
    assert_eq!(base.len(), moved.len());
    for interrelation in &base {
        let counterpart = moved
            .iter()
            .find(|m| m.stop == interrelation.stop)
            .expect("same stops interrelate");
        assert_eq!(counterpart.lines, translate(&interrelation.lines));
    }
}

#[test]
fn stop_count_per_line_is_rule_count_plus_one() {
    let map = sample_map();
    let svg = render_svg(&map).unwrap();
    let expected: usize = map.lines.iter().map(|l| l.len() + 1).sum();
    assert_eq!(svg.matches("<circle").count(), expected);
}
