// @vitest-environment jsdom
import { readFileSync } from 'node:fs';
import { beforeEach, describe, expect, it } from 'vitest';

import { collectGeometry, positionalXPath } from '../src/probe';

type RectSpec = { x: number; y: number; width: number; height: number };

/** jsdom has no layout engine; rects come from data attributes. */
function stubRects() {
  (Element.prototype as any).getBoundingClientRect = function () {
    const spec = (this as Element).getAttribute('data-rect');
    const [x, y, width, height] = spec
      ? (JSON.parse(spec) as [number, number, number, number])
      : [0, 0, 0, 0];
    return {
      x, y, width, height,
      left: x, top: y, right: x + width, bottom: y + height,
      toJSON() {}
    } as DOMRect;
  };
}

function setBody(html: string) {
  document.body.innerHTML = html;
  document.documentElement.setAttribute('data-rect', '[0,0,1024,768]');
  document.body.setAttribute('data-rect', '[0,0,1024,768]');
}

beforeEach(() => {
  stubRects();
  Object.defineProperty(window, 'scrollX', { value: 0, configurable: true });
  Object.defineProperty(window, 'scrollY', { value: 0, configurable: true });
});

describe('positionalXPath', () => {
  it('indexes same-tag siblings and keeps html/body bare', () => {
    setBody('<div></div><div><p></p><span></span><p></p></div>');
    const divs = document.querySelectorAll('div');
    expect(positionalXPath(divs[0])).toBe('/html/body/div[1]');
    expect(positionalXPath(divs[1])).toBe('/html/body/div[2]');
    const ps = divs[1].querySelectorAll('p');
    expect(positionalXPath(ps[0])).toBe('/html/body/div[2]/p[1]');
    expect(positionalXPath(ps[1])).toBe('/html/body/div[2]/p[2]');
  });

  it('round-trips through document.evaluate', () => {
    setBody('<div><section><p>a</p><p>b</p></section></div>');
    for (const el of Array.from(document.querySelectorAll('*'))) {
      const xpath = positionalXPath(el);
      const found = document.evaluate(
        xpath, document, null, XPathResult.FIRST_ORDERED_NODE_TYPE, null
      ).singleNodeValue;
      expect(found, xpath).toBe(el);
    }
  });
});

describe('collectGeometry', () => {
  it('emits only positive-area elements with page-coordinate rects', () => {
    setBody(
      '<div id="a" data-rect="[10,20,100,50]">x</div>' +
      '<div id="zero" data-rect="[0,0,0,0]">y</div>'
    );
    const result = collectGeometry();
    const paths = result.elements.map((e) => e.xpath);
    expect(paths).toContain('/html/body/div[1]');
    expect(paths).not.toContain('/html/body/div[2]');
    const a = result.elements.find((e) => e.xpath === '/html/body/div[1]')!;
    expect(a.rect).toEqual({ x: 10, y: 20, width: 100, height: 50 });
  });

  it('offsets rects by the scroll position', () => {
    setBody('<div data-rect="[10,20,100,50]">x</div>');
    Object.defineProperty(window, 'scrollX', { value: 7, configurable: true });
    Object.defineProperty(window, 'scrollY', { value: 30, configurable: true });
    const result = collectGeometry();
    const div = result.elements.find((e) => e.xpath === '/html/body/div[1]')!;
    expect(div.rect.x).toBe(17);
    expect(div.rect.y).toBe(50);
  });

  it('skips display:none subtag and keeps parent links topological', () => {
    setBody(
      '<div data-rect="[0,0,200,200]">' +
      '<p data-rect="[5,5,50,20]">keep</p>' +
      '<p style="display:none" data-rect="[5,30,50,20]">drop</p>' +
      '</div>'
    );
    const result = collectGeometry();
    const paths = result.elements.map((e) => e.xpath);
    expect(paths).toContain('/html/body/div[1]/p[1]');
    expect(paths).not.toContain('/html/body/div[1]/p[2]');
    for (let i = 0; i < result.elements.length; i++) {
      expect(result.elements[i].parent_index).toBeLessThan(i);
    }
    expect(result.elements[0].parent_index).toBe(-1);
  });

  it('links children past a zero-area parent to the nearest emitted ancestor', () => {
    setBody(
      '<div data-rect="[0,0,300,300]">' +
      '<span data-rect="[0,0,0,0]">' +
      '<b data-rect="[1,1,10,10]">deep</b>' +
      '</span></div>'
    );
    const result = collectGeometry();
    const paths = result.elements.map((e) => e.xpath);
    const b = result.elements.find((e) => e.xpath.endsWith('/b[1]'))!;
    expect(paths).not.toContain('/html/body/div[1]/span[1]');
    expect(result.elements[b.parent_index].xpath).toBe('/html/body/div[1]');
  });

  it('reports the viewport dimensions', () => {
    setBody('<div data-rect="[0,0,10,10]">x</div>');
    const result = collectGeometry();
    expect(result.viewport.width).toBeTypeOf('number');
    expect(result.viewport.height).toBeTypeOf('number');
  });
});

describe('built artifact', () => {
  it('is a plain script and matches the copy shipped with the Python package', () => {
    // vitest runs from frontend/, so cwd-relative paths are stable.
    const dist = readFileSync('dist/probe.js', 'utf8');
    const shipped = readFileSync('../src/redefix/data/probe.js', 'utf8');
    expect(dist).toBe(shipped);
    expect(dist).toContain('__REDEFIX_PROBE__');
    expect(dist).toContain('function collectGeometry()');
    expect(dist).not.toMatch(/\bexport\b/);
  });
});
