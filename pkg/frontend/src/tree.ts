// Foldable schema trees. Leaves are attributes; their ids follow document
// order, matching the service's attribute numbering.

import type { AttributeInfo, SchemaNode } from "./types";

export interface LeafRef {
  id: number;
  name: string;
  path: string[];
}

/** Flatten a schema tree to its leaves in document order. */
export function collectLeaves(root: SchemaNode): LeafRef[] {
  const leaves: LeafRef[] = [];
  const walk = (node: SchemaNode, path: string[]) => {
    const here = [...path, node.name];
    if (node.children && node.children.length > 0) {
      for (const child of node.children) walk(child, here);
    } else {
      leaves.push({ id: leaves.length, name: node.name, path: here });
    }
  };
  for (const child of root.children ?? []) walk(child, [root.name]);
  return leaves;
}

export function renderTree(
  container: HTMLElement,
  root: SchemaNode,
  onSelect: (leafId: number) => void,
): void {
  container.textContent = "";
  let leafCounter = 0;

  const build = (node: SchemaNode): HTMLElement => {
    const isLeaf = !node.children || node.children.length === 0;
    if (isLeaf) {
      const leaf = document.createElement("div");
      leaf.className = "tree-leaf";
      leaf.dataset.leafId = String(leafCounter);
      leaf.textContent = node.name;
      const id = leafCounter++;
      leaf.addEventListener("click", () => {
        container
          .querySelectorAll(".tree-leaf.selected")
          .forEach((el) => el.classList.remove("selected"));
        leaf.classList.add("selected");
        onSelect(id);
      });
      return leaf;
    }
    const details = document.createElement("details");
    details.open = true;
    details.className = "tree-branch";
    const summary = document.createElement("summary");
    summary.textContent = node.name;
    details.appendChild(summary);
    for (const child of node.children ?? []) details.appendChild(build(child));
    return details;
  };

  const title = document.createElement("div");
  title.className = "tree-title";
  title.textContent = root.name;
  container.appendChild(title);
  for (const child of root.children ?? []) container.appendChild(build(child));
}

/** The properties box content for a selected attribute. */
export function describeAttribute(attr: AttributeInfo): string[] {
  const lines = [`path: ${attr.path.join(" / ")}`];
  if (attr.datatype) lines.push(`datatype: ${attr.datatype}`);
  if (attr.instances.length > 0) lines.push(`instances: ${attr.instances.join(", ")}`);
  return lines;
}

export function renderPropertiesBox(container: HTMLElement, attr: AttributeInfo | null): void {
  container.textContent = "";
  if (!attr) {
    container.textContent = "select an attribute to inspect it";
    return;
  }
  const title = document.createElement("strong");
  title.textContent = attr.name;
  container.appendChild(title);
  for (const line of describeAttribute(attr)) {
    const row = document.createElement("div");
    row.textContent = line;
    container.appendChild(row);
  }
}
