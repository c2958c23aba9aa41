from redefix.dom import parse_html

PAGE = """
<html>
<head><style>body { margin: 0; }</style></head>
<body>
  <div id="main">
    <p>first</p>
    <p>second</p>
  </div>
  <div class="footer">tail</div>
</body>
</html>
"""


def test_xpath_generation_and_resolution_round_trip():
    doc = parse_html(PAGE)
    for el in doc.iter():
        assert doc.resolve_xpath(el.xpath()) is el


def test_positional_xpath_counts_same_tag_siblings():
    doc = parse_html(PAGE)
    main = doc.get_element_by_id("main")
    second_p = main.child_elements()[1]
    assert second_p.xpath() == "/html/body/div[1]/p[2]"


def test_resolve_unknown_path_returns_none():
    doc = parse_html(PAGE)
    assert doc.resolve_xpath("/html/body/div[9]") is None
    assert doc.resolve_xpath("not-an-xpath") is None


def test_missing_body_is_synthesized():
    doc = parse_html("<div>loose</div>")
    assert doc.body is not None
    assert doc.body.child_elements()[0].tag == "div"


def test_void_elements_take_no_children():
    doc = parse_html("<html><body><br><div>x</div></body></html>")
    body = doc.body
    tags = [e.tag for e in body.child_elements()]
    assert tags == ["br", "div"]


def test_style_texts_collected():
    doc = parse_html(PAGE)
    assert doc.style_texts() == ["body { margin: 0; }"]


def test_misnested_end_tag_recovery():
    doc = parse_html("<html><body><div><p>text</div></body></html>")
    div = doc.body.child_elements()[0]
    assert div.tag == "div"
    assert div.child_elements()[0].tag == "p"
