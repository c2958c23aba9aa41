/* __REDEFIX_PROBE__ v1
 * Enumerates every visible element with its positional XPath and border-box
 * rectangle in page coordinates. Executed via WebDriver execute-script; the
 * caller appends "return collectGeometry();". The build strips the module
 * syntax so the artifact is a plain script.
 */
function positionalXPath(element) {
    const steps = [];
    let node = element;
    while (node && node.nodeType === 1) {
        const tag = node.nodeName.toLowerCase();
        if (tag === 'html' || tag === 'body') {
            steps.unshift(tag);
        }
        else {
            let index = 1;
            let sibling = node.previousElementSibling;
            while (sibling) {
                if (sibling.nodeName === node.nodeName) {
                    index += 1;
                }
                sibling = sibling.previousElementSibling;
            }
            steps.unshift(tag + '[' + index + ']');
        }
        node = node.parentElement;
    }
    return '/' + steps.join('/');
}
function collectGeometry() {
    const out = [];
    const emitted = [];
    function nearestEmittedAncestor(element) {
        let node = element.parentElement;
        while (node) {
            for (let i = 0; i < emitted.length; i++) {
                if (emitted[i].node === node) {
                    return emitted[i].index;
                }
            }
            node = node.parentElement;
        }
        return -1;
    }
    const all = document.getElementsByTagName('*');
    for (let i = 0; i < all.length; i++) {
        const el = all[i];
        const style = window.getComputedStyle(el);
        if (!style || style.display === 'none') {
            continue;
        }
        const rect = el.getBoundingClientRect();
        if (rect.width <= 0 || rect.height <= 0) {
            continue;
        }
        const entry = {
            xpath: positionalXPath(el),
            rect: {
                x: rect.left + window.scrollX,
                y: rect.top + window.scrollY,
                width: rect.width,
                height: rect.height
            },
            parent_index: nearestEmittedAncestor(el)
        };
        emitted.push({ node: el, index: out.length });
        out.push(entry);
    }
    return {
        elements: out,
        viewport: {
            width: document.documentElement.clientWidth,
            height: document.documentElement.clientHeight
        }
    };
}
