use std::fmt;

use crate::grammar::{Cell, Row, Section, Span, TableTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Table,
    Thead,
    Tbody,
    Tr,
    Td,
}

/// Node label: tag name plus the span attributes (only meaningful on `td`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeLabel {
    pub tag: Tag,
    pub rowspan: Option<Span>,
    pub colspan: Option<Span>,
}

impl NodeLabel {
    pub const fn tag(tag: Tag) -> Self {
        Self {
            tag,
            rowspan: None,
            colspan: None,
        }
    }

    pub fn cell(cell: &Cell) -> Self {
        Self {
            tag: Tag::Td,
            rowspan: cell.rowspan,
            colspan: cell.colspan,
        }
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.tag {
            Tag::Table => "table",
            Tag::Thead => "thead",
            Tag::Tbody => "tbody",
            Tag::Tr => "tr",
            Tag::Td => "td",
        };
        f.write_str(name)?;
        if let Some(r) = self.rowspan {
            write!(f, "[rowspan={r}]")?;
        }
        if let Some(c) = self.colspan {
            write!(f, "[colspan={c}]")?;
        }
        Ok(())
    }
}

/// Ordered labeled tree stored as a preorder arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledTree {
    labels: Vec<NodeLabel>,
    children: Vec<Vec<usize>>,
}

impl LabeledTree {
    pub fn leaf(label: NodeLabel) -> Self {
        Self::node(label, Vec::new())
    }

    pub fn node(label: NodeLabel, subtrees: Vec<LabeledTree>) -> Self {
        let mut labels = vec![label];
        let mut children = vec![Vec::new()];
        for sub in subtrees {
            let offset = labels.len();
            children[0].push(offset);
            labels.extend(sub.labels);
            children.extend(
                sub.children
                    .into_iter()
                    .map(|c| c.into_iter().map(|i| i + offset).collect()),
            );
        }
        Self { labels, children }
    }

    /// Wraps a table structure under a synthetic `table` root.
    pub fn from_table(tree: &TableTree) -> Self {
        fn row(r: &Row) -> LabeledTree {
            LabeledTree::node(
                NodeLabel::tag(Tag::Tr),
                r.cells
                    .iter()
                    .map(|c| LabeledTree::leaf(NodeLabel::cell(c)))
                    .collect(),
            )
        }
        let sections = tree
            .sections
            .iter()
            .map(|s| match s {
                Section::Head(rows) => {
                    LabeledTree::node(NodeLabel::tag(Tag::Thead), rows.iter().map(row).collect())
                }
                Section::Body(rows) => {
                    LabeledTree::node(NodeLabel::tag(Tag::Tbody), rows.iter().map(row).collect())
                }
                Section::Bare(r) => row(r),
            })
            .collect();
        LabeledTree::node(NodeLabel::tag(Tag::Table), sections)
    }

    /// Number of nodes, root included.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, node: usize) -> &NodeLabel {
        &self.labels[node]
    }

    pub fn labels(&self) -> &[NodeLabel] {
        &self.labels
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// Parent of each node in preorder; `None` for the root.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parents = vec![None; self.len()];
        for (p, cs) in self.children.iter().enumerate() {
            for &c in cs {
                parents[c] = Some(p);
            }
        }
        parents
    }

    /// Postorder node list and, for each postorder position, the postorder
    /// position of its leftmost leaf descendant.
    pub(crate) fn postorder(&self) -> (Vec<usize>, Vec<usize>) {
        fn walk(t: &LabeledTree, n: usize, order: &mut Vec<usize>, lml: &mut Vec<usize>) -> usize {
            let mut leftmost = None;
            for &c in t.children(n) {
                let l = walk(t, c, order, lml);
                leftmost.get_or_insert(l);
            }
            let me = order.len();
            order.push(n);
            let l = leftmost.unwrap_or(me);
            lml.push(l);
            l
        }
        let mut order = Vec::with_capacity(self.len());
        let mut lml = Vec::with_capacity(self.len());
        if !self.is_empty() {
            walk(self, 0, &mut order, &mut lml);
        }
        (order, lml)
    }
}
