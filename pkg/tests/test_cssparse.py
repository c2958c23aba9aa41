from redefix.cssparse import (
    MediaQuery,
    parse_declarations,
    parse_selector,
    parse_stylesheet,
    query_all,
)
from redefix.dom import parse_html

DOC = parse_html(
    """
<html><body>
  <div id="main">
    <span class="a b">one</span>
    <p class="a">two</p>
  </div>
  <div><p>three</p></div>
</body></html>
"""
)


def test_declarations_split_and_important():
    decls = parse_declarations("width: 50% !important; color:red; :bad; empty:;")
    assert [(d.prop, d.value, d.important) for d in decls] == [
        ("width", "50%", True),
        ("color", "red", False),
    ]


def test_media_query_window():
    mq = MediaQuery.parse("(min-width: 320px) and (max-width: 767px)")
    assert mq.matches(320) and mq.matches(767)
    assert not mq.matches(319) and not mq.matches(768)


def test_stylesheet_flattening_with_media():
    rules = parse_stylesheet(
        """
        /* comment */
        .x, .y { margin: 0 }
        @media (max-width: 600px) { .x { width: 100px; } }
        """
    )
    assert [r.selector for r in rules] == [".x", ".y", ".x"]
    assert rules[2].media == MediaQuery(None, 600.0)
    assert rules[0].media is None


def test_selector_matching_and_specificity():
    main = DOC.get_element_by_id("main")
    span = main.child_elements()[0]
    sel = parse_selector("#main > span.a")
    assert sel.matches(span)
    assert not sel.matches(main.child_elements()[1])
    assert sel.specificity() == (1, 1, 1)

    nth = parse_selector("div > p:nth-child(2)")
    assert nth.matches(main.child_elements()[1])


def test_descendant_combinator():
    sel = parse_selector("body p")
    ps = [e for e in DOC.iter() if sel.matches(e)]
    assert [e.text_content() for e in ps] == ["two", "three"]


def test_query_all_with_comma_groups():
    found = query_all(DOC.root, "#main > span, div > p")
    assert [e.text_content() for e in found] == ["one", "two", "three"]


def test_unknown_pseudo_class_never_matches():
    sel = parse_selector("div:hover")
    assert all(not sel.matches(e) for e in DOC.iter())
