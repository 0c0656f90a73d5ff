// Small DOM construction helpers so the views stay readable without a framework.

type Attrs = Record<string, string | number | boolean | EventListener>;

function assign(node: Element, attrs: Attrs): void {
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(key.replace(/^on/, ""), value as EventListener);
    } else if (typeof value === "boolean") {
      if (key in node) {
        (node as any)[key] = value;
      } else if (value) {
        node.setAttribute(key, "");
      }
    } else {
      node.setAttribute(key, String(value));
    }
  }
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Attrs = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  assign(node, attrs);
  for (const child of children) {
    node.append(child);
  }
  return node;
}

const SVG_NS = "http://www.w3.org/2000/svg";

export function svgEl(tag: string, attrs: Attrs = {}, children: (Node | string)[] = []): SVGElement {
  const node = document.createElementNS(SVG_NS, tag) as SVGElement;
  assign(node, attrs);
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function clear(node: Element): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function option(value: string, label?: string, selected = false): HTMLOptionElement {
  const o = el("option", { value }, [label ?? value]);
  if (selected) o.selected = true;
  return o;
}
