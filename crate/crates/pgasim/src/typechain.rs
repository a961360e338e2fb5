//! Type descriptors, chain composition, and attribute resolution.
//!
//! A variable's semantics are carried entirely by its *type chain*: an
//! ordered, non-empty list of descriptors joined by `::`. The leftmost
//! descriptor is an element or container kind (`Long`, `array`, `queue`,
//! `referencerecord`, ...); everything to its right is an attribute kind
//! (`allocated`, `const`, `async`, `allreduce`). Attribute precedence is
//! right to left: the rightmost descriptor that defines an attribute wins,
//! so `Char::const` downgrades `Char`'s default read-write access to read
//! only, and `async[128]::async[64]` ends up with a 64-element buffer.
//!
//! Not every combination is legal — `Int::Char` is meaningless — and each
//! kind constrains its arguments (`partitioned` takes one positive integer,
//! `allreduce` takes `"sum"`, ...). All public constructors validate, so a
//! [`TypeChain`] value is always a legal chain and [`TypeChain::resolve`]
//! cannot fail.
//!
//! Chains have a stable text rendering used in logs and configuration, e.g.
//! `array[Long,16]::allocated[partitioned[4]::single[evendist]]`, and parse
//! back from it ([`TypeChain::parse`]).

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// Buffer capacity, in elements, used by `async` when no argument is given.
pub const DEFAULT_ASYNC_CAPACITY: usize = 256;

/// The closed set of type names a descriptor can carry.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    // element kinds
    Long,
    Char,
    Int,
    Bool,
    /// A named record type introduced by aliasing (`typevar`-style).
    Custom(String),
    // container kinds
    Array,
    Queue,
    ReferenceRecord,
    // attribute kinds
    Allocated,
    Partitioned,
    Single,
    Multiple,
    Evendist,
    Const,
    Async,
    Allreduce,
}

impl Kind {
    pub fn name(&self) -> &str {
        match self {
            Kind::Long => "Long",
            Kind::Char => "Char",
            Kind::Int => "Int",
            Kind::Bool => "Bool",
            Kind::Custom(n) => n,
            Kind::Array => "array",
            Kind::Queue => "queue",
            Kind::ReferenceRecord => "referencerecord",
            Kind::Allocated => "allocated",
            Kind::Partitioned => "partitioned",
            Kind::Single => "single",
            Kind::Multiple => "multiple",
            Kind::Evendist => "evendist",
            Kind::Const => "const",
            Kind::Async => "async",
            Kind::Allreduce => "allreduce",
        }
    }

    pub fn is_element(&self) -> bool {
        matches!(self, Kind::Long | Kind::Char | Kind::Int | Kind::Bool | Kind::Custom(_))
    }

    pub fn is_container(&self) -> bool {
        matches!(self, Kind::Array | Kind::Queue | Kind::ReferenceRecord)
    }

    pub fn is_attribute(&self) -> bool {
        !self.is_element() && !self.is_container()
    }
}

/// A descriptor argument: integer, string, or a nested chain.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Arg {
    Int(u64),
    Str(String),
    Chain(TypeChain),
}

/// One link of a type chain: a kind plus its arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TypeDescriptor {
    kind: Kind,
    args: Vec<Arg>,
}

impl TypeDescriptor {
    pub fn new(kind: Kind, args: Vec<Arg>) -> Self {
        TypeDescriptor { kind, args }
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn args(&self) -> &[Arg] {
        &self.args
    }

    pub fn long() -> Self {
        Self::new(Kind::Long, vec![])
    }

    pub fn int() -> Self {
        Self::new(Kind::Int, vec![])
    }

    pub fn char_kind() -> Self {
        Self::new(Kind::Char, vec![])
    }

    pub fn bool_kind() -> Self {
        Self::new(Kind::Bool, vec![])
    }

    pub fn custom(name: impl Into<String>) -> Self {
        Self::new(Kind::Custom(name.into()), vec![])
    }

    /// `array[elem,len]`
    pub fn array(element: TypeChain, len: u64) -> Self {
        Self::new(Kind::Array, vec![Arg::Chain(element), Arg::Int(len)])
    }

    /// `array[elem]` — the unsized form record fields use.
    pub fn array_unsized(element: TypeChain) -> Self {
        Self::new(Kind::Array, vec![Arg::Chain(element)])
    }

    /// `queue[elem]`
    pub fn queue(element: TypeChain) -> Self {
        Self::new(Kind::Queue, vec![Arg::Chain(element)])
    }

    /// `referencerecord["name", chain, ...]`
    pub fn reference_record(fields: Vec<(String, TypeChain)>) -> Self {
        let mut args = Vec::with_capacity(fields.len() * 2);
        for (name, chain) in fields {
            args.push(Arg::Str(name));
            args.push(Arg::Chain(chain));
        }
        Self::new(Kind::ReferenceRecord, args)
    }

    /// `allocated[multiple]` — every rank holds its own copy.
    pub fn allocated_multiple() -> Self {
        let spec = TypeChain::unchecked(vec![Self::new(Kind::Multiple, vec![])]);
        Self::new(Kind::Allocated, vec![Arg::Chain(spec)])
    }

    /// `allocated[partitioned[p]::single[evendist]]` — one global copy in
    /// `p` evenly distributed blocks.
    pub fn allocated_block(partitions: u64) -> Self {
        let evendist = TypeChain::unchecked(vec![Self::new(Kind::Evendist, vec![])]);
        let spec = TypeChain::unchecked(vec![
            Self::new(Kind::Partitioned, vec![Arg::Int(partitions)]),
            Self::new(Kind::Single, vec![Arg::Chain(evendist)]),
        ]);
        Self::new(Kind::Allocated, vec![Arg::Chain(spec)])
    }

    /// `const`
    pub fn constant() -> Self {
        Self::new(Kind::Const, vec![])
    }

    /// `async` or `async[capacity]`
    pub fn asynchronous(capacity: Option<u64>) -> Self {
        let args = capacity.map(|c| vec![Arg::Int(c)]).unwrap_or_default();
        Self::new(Kind::Async, args)
    }

    /// `allreduce["sum"]`
    pub fn allreduce_sum() -> Self {
        Self::new(Kind::Allreduce, vec![Arg::Str("sum".to_owned())])
    }
}

/// An ordered, validated composition of type descriptors.
///
/// Every public constructor runs the coercion rules, so a `TypeChain` value
/// is always legal and [`resolve`](TypeChain::resolve) is total.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TypeChain {
    items: Vec<TypeDescriptor>,
}

impl TypeChain {
    /// Single-descriptor chain.
    pub fn new(head: TypeDescriptor) -> Result<Self> {
        Self::from_descriptors(vec![head])
    }

    /// Builds and validates a chain from raw descriptors. This is the
    /// `validate` operation: it returns `IllegalCoercion` naming the
    /// offending pair, or `InvalidChain` for structural argument problems.
    pub fn from_descriptors(items: Vec<TypeDescriptor>) -> Result<Self> {
        validate_variable_chain(&items)?;
        Ok(TypeChain { items })
    }

    pub(crate) fn unchecked(items: Vec<TypeDescriptor>) -> Self {
        TypeChain { items }
    }

    pub fn items(&self) -> &[TypeDescriptor] {
        &self.items
    }

    pub fn head(&self) -> &TypeDescriptor {
        &self.items[0]
    }

    /// The `::` operator: returns `self` with `right` appended, validated.
    /// Inputs are unchanged.
    pub fn compose(&self, right: TypeDescriptor) -> Result<TypeChain> {
        let mut items = self.items.clone();
        items.push(right);
        Self::from_descriptors(items)
    }

    /// Resolves the chain's attributes right to left: the rightmost
    /// descriptor defining an attribute contributes its value; attributes no
    /// descriptor defines take the documented defaults (read-write,
    /// one-sided, 256-element async capacity, no reduction, scalar-local
    /// allocation).
    pub fn resolve(&self) -> ResolvedAttributes {
        let head = &self.items[0];
        let element = match head.kind() {
            Kind::Array | Kind::Queue => match &head.args()[0] {
                Arg::Chain(c) => c.clone(),
                _ => unreachable!("validated container carries a chain argument"),
            },
            _ => TypeChain::unchecked(vec![head.clone()]),
        };

        let mut out = ResolvedAttributes {
            element,
            allocation: Allocation::ScalarLocal,
            distribution: Distribution::None,
            partitions: None,
            mutability: Mutability::ReadWrite,
            comm_mode: CommMode::OneSided,
            async_capacity: DEFAULT_ASYNC_CAPACITY,
            reduction: Reduction::None,
        };

        for desc in &self.items {
            match desc.kind() {
                Kind::Allocated => {
                    let spec = match &desc.args()[0] {
                        Arg::Chain(c) => c,
                        _ => unreachable!("validated allocated carries a chain argument"),
                    };
                    apply_allocation(spec, &mut out);
                }
                Kind::Const => out.mutability = Mutability::ReadOnly,
                Kind::Async => {
                    out.comm_mode = CommMode::Async;
                    out.async_capacity = match desc.args().first() {
                        Some(Arg::Int(n)) => *n as usize,
                        _ => DEFAULT_ASYNC_CAPACITY,
                    };
                }
                Kind::Allreduce => out.reduction = Reduction::Sum,
                _ => {}
            }
        }
        out
    }

    /// Resolves as if `extras` were appended to the chain, without touching
    /// the stored chain — the per-expression override mechanism behind
    /// `value::allreduce["sum"] := ...`.
    pub fn override_for_expression(&self, extras: &[TypeDescriptor]) -> Result<ResolvedAttributes> {
        let mut items = self.items.clone();
        items.extend_from_slice(extras);
        Ok(Self::from_descriptors(items)?.resolve())
    }

    /// Parses the stable text rendering, e.g.
    /// `queue[GraphVertex]::allocated[multiple]::async[128]`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { src: text.as_bytes(), pos: 0 };
        let items = p.chain()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(Error::ChainParse { at: p.pos, reason: "trailing input".into() });
        }
        Self::from_descriptors(items)
    }
}

fn apply_allocation(spec: &TypeChain, out: &mut ResolvedAttributes) {
    let mut partitions = None;
    let mut evendist = false;
    let mut multiple = false;
    for d in spec.items() {
        match d.kind() {
            Kind::Multiple => multiple = true,
            Kind::Partitioned => {
                if let Some(Arg::Int(n)) = d.args().first() {
                    partitions = Some(*n as usize);
                }
            }
            Kind::Single => {
                evendist = matches!(
                    d.args().first(),
                    Some(Arg::Chain(c)) if c.items().iter().any(|i| i.kind() == &Kind::Evendist)
                );
            }
            _ => {}
        }
    }
    if multiple {
        out.allocation = Allocation::MultiplePerRank;
        out.partitions = None;
        out.distribution = Distribution::None;
    } else {
        out.allocation = Allocation::SinglePartitioned;
        out.partitions = partitions;
        out.distribution = if evendist { Distribution::Evendist } else { Distribution::None };
    }
}

/// Where a variable's storage lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Allocation {
    /// Plain local value on each execution context.
    ScalarLocal,
    /// One global copy split into partitions, each owned by a rank.
    SinglePartitioned,
    /// A distinct copy per rank.
    MultiplePerRank,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Distribution {
    None,
    Evendist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutability {
    ReadWrite,
    ReadOnly,
}

/// How remote accesses to the variable travel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommMode {
    OneSided,
    Async,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    None,
    Sum,
}

/// The right-to-left resolution of a chain: one value per attribute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolvedAttributes {
    /// Element chain for containers; the head itself for scalars/records.
    pub element: TypeChain,
    pub allocation: Allocation,
    pub distribution: Distribution,
    pub partitions: Option<usize>,
    pub mutability: Mutability,
    pub comm_mode: CommMode,
    /// Coalescing buffer capacity in elements; meaningful when
    /// `comm_mode == Async`.
    pub async_capacity: usize,
    pub reduction: Reduction,
}

// ---------------------------------------------------------------------------
// validation

fn validate_variable_chain(items: &[TypeDescriptor]) -> Result<()> {
    let head = items
        .first()
        .ok_or_else(|| Error::invalid_chain("a type chain must not be empty"))?;
    if head.kind().is_attribute() {
        return Err(Error::invalid_chain(format!(
            "chain must begin with an element or container kind, found `{}`",
            head.kind().name()
        )));
    }
    for pair in items.windows(2) {
        let (left, right) = (&pair[0], &pair[1]);
        if right.kind().is_element() || right.kind().is_container() {
            return Err(Error::coercion(left.kind().name(), right.kind().name()));
        }
        match right.kind() {
            Kind::Allocated | Kind::Const | Kind::Async | Kind::Allreduce => {}
            other => {
                return Err(Error::invalid_chain(format!(
                    "`{}` is only valid inside allocated[...], not after `{}`",
                    other.name(),
                    left.kind().name()
                )))
            }
        }
    }
    for d in items {
        validate_descriptor_args(d)?;
    }
    Ok(())
}

fn validate_descriptor_args(d: &TypeDescriptor) -> Result<()> {
    let kind = d.kind();
    let args = d.args();
    let arity = |ok: bool, want: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::invalid_chain(format!("`{}` takes {}", kind.name(), want)))
        }
    };
    match kind {
        Kind::Long | Kind::Char | Kind::Int | Kind::Bool | Kind::Custom(_) => {
            arity(args.is_empty(), "no arguments")
        }
        Kind::Array => {
            arity(matches!(args.len(), 1 | 2), "an element chain and an optional length")?;
            match &args[0] {
                Arg::Chain(c) => validate_variable_chain(c.items())?,
                _ => return Err(Error::invalid_chain("`array` element must be a type chain")),
            }
            if args.len() == 2 && !matches!(args[1], Arg::Int(_)) {
                return Err(Error::invalid_chain("`array` length must be an integer"));
            }
            Ok(())
        }
        Kind::Queue => {
            arity(args.len() == 1, "exactly one element chain")?;
            match &args[0] {
                Arg::Chain(c) => validate_variable_chain(c.items()),
                _ => Err(Error::invalid_chain("`queue` element must be a type chain")),
            }
        }
        Kind::ReferenceRecord => {
            arity(!args.is_empty() && args.len().is_multiple_of(2), "name/chain pairs")?;
            let mut names = BTreeSet::new();
            for pair in args.chunks(2) {
                let name = match &pair[0] {
                    Arg::Str(s) => s,
                    _ => {
                        return Err(Error::invalid_chain(
                            "`referencerecord` field names must be strings",
                        ))
                    }
                };
                if !names.insert(name.clone()) {
                    return Err(Error::invalid_chain(format!(
                        "duplicate `referencerecord` field `{name}`"
                    )));
                }
                match &pair[1] {
                    Arg::Chain(c) => validate_variable_chain(c.items())?,
                    _ => {
                        return Err(Error::invalid_chain(
                            "`referencerecord` field types must be chains",
                        ))
                    }
                }
            }
            Ok(())
        }
        Kind::Allocated => {
            arity(args.len() == 1, "exactly one allocation chain")?;
            match &args[0] {
                Arg::Chain(c) => validate_alloc_chain(c.items()),
                _ => Err(Error::invalid_chain("`allocated` takes a chain argument")),
            }
        }
        Kind::Const | Kind::Multiple | Kind::Evendist => arity(args.is_empty(), "no arguments"),
        Kind::Async => match args {
            [] => Ok(()),
            [Arg::Int(n)] if *n >= 1 => Ok(()),
            _ => Err(Error::invalid_chain(
                "`async` takes no argument or one positive buffer capacity",
            )),
        },
        Kind::Allreduce => match args {
            [Arg::Str(op)] if op == "sum" => Ok(()),
            [Arg::Str(op)] => {
                Err(Error::invalid_chain(format!("unsupported allreduce op \"{op}\"")))
            }
            _ => Err(Error::invalid_chain("`allreduce` takes exactly one op string")),
        },
        Kind::Partitioned => match args {
            [Arg::Int(n)] if *n >= 1 => Ok(()),
            _ => Err(Error::invalid_chain("`partitioned` takes one positive partition count")),
        },
        Kind::Single => match args {
            [] => Ok(()),
            [Arg::Chain(c)]
                if c.items().len() == 1 && c.items()[0].kind() == &Kind::Evendist =>
            {
                validate_descriptor_args(&c.items()[0])
            }
            _ => Err(Error::invalid_chain("`single` takes at most `evendist`")),
        },
    }
}

fn validate_alloc_chain(items: &[TypeDescriptor]) -> Result<()> {
    if items.is_empty() {
        return Err(Error::invalid_chain("`allocated` needs a non-empty allocation chain"));
    }
    let mut single = 0usize;
    let mut multiple = 0usize;
    let mut partitioned = 0usize;
    for d in items {
        match d.kind() {
            Kind::Single => single += 1,
            Kind::Multiple => multiple += 1,
            Kind::Partitioned => partitioned += 1,
            other => {
                return Err(Error::invalid_chain(format!(
                    "`{}` is not an allocation attribute",
                    other.name()
                )))
            }
        }
        validate_descriptor_args(d)?;
    }
    if single > 1 || multiple > 1 || partitioned > 1 {
        return Err(Error::invalid_chain("repeated allocation attribute"));
    }
    if single + multiple == 0 {
        return Err(Error::invalid_chain("allocation needs `single` or `multiple`"));
    }
    if single == 1 && multiple == 1 {
        return Err(Error::coercion("single", "multiple"));
    }
    if multiple == 1 && partitioned == 1 {
        return Err(Error::coercion("multiple", "partitioned"));
    }
    if single == 1 && partitioned == 0 {
        return Err(Error::invalid_chain("`single` requires `partitioned[n]`"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// aliases

/// Named aliases for record descriptors, the `typevar`-style mechanism that
/// lets `queue[GraphVertex]` stand for a queue of a previously declared
/// referencerecord.
#[derive(Clone, Debug, Default)]
pub struct AliasTable {
    map: std::collections::BTreeMap<String, TypeDescriptor>,
}

impl AliasTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares `name ::= descriptor`. The descriptor must be a
    /// `referencerecord`.
    pub fn define(&mut self, name: impl Into<String>, descriptor: TypeDescriptor) -> Result<()> {
        if descriptor.kind() != &Kind::ReferenceRecord {
            return Err(Error::invalid_chain("aliases must name a referencerecord"));
        }
        validate_descriptor_args(&descriptor)?;
        self.map.insert(name.into(), descriptor);
        Ok(())
    }

    /// Replaces aliased custom kinds with their record descriptors, one
    /// level deep per name: self-referential fields (a record whose fields
    /// point at the same record) stay as the named kind, which keeps
    /// expansion finite.
    pub fn expand(&self, chain: &TypeChain) -> Result<TypeChain> {
        let mut visiting = BTreeSet::new();
        let items = self.expand_items(chain.items(), &mut visiting);
        TypeChain::from_descriptors(items)
    }

    fn expand_items(
        &self,
        items: &[TypeDescriptor],
        visiting: &mut BTreeSet<String>,
    ) -> Vec<TypeDescriptor> {
        items.iter().map(|d| self.expand_descriptor(d, visiting)).collect()
    }

    fn expand_descriptor(
        &self,
        d: &TypeDescriptor,
        visiting: &mut BTreeSet<String>,
    ) -> TypeDescriptor {
        if let Kind::Custom(name) = d.kind() {
            if let Some(record) = self.map.get(name) {
                if visiting.insert(name.clone()) {
                    let expanded = self.expand_descriptor(record, visiting);
                    visiting.remove(name);
                    return expanded;
                }
                return d.clone();
            }
        }
        let args = d
            .args()
            .iter()
            .map(|a| match a {
                Arg::Chain(c) => {
                    Arg::Chain(TypeChain::unchecked(self.expand_items(c.items(), visiting)))
                }
                other => other.clone(),
            })
            .collect();
        TypeDescriptor::new(d.kind().clone(), args)
    }
}

// ---------------------------------------------------------------------------
// rendering and parsing

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Int(n) => write!(f, "{n}"),
            Arg::Str(s) => write!(f, "\"{s}\""),
            Arg::Chain(c) => write!(f, "{c}"),
        }
    }
}

impl fmt::Display for TypeDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        if !self.args.is_empty() {
            write!(f, "[")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

impl fmt::Display for TypeChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.items.iter().enumerate() {
            if i > 0 {
                write!(f, "::")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for TypeChain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TypeChain::parse(s)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::ChainParse { at: self.pos, reason: reason.into() }
    }

    fn chain(&mut self) -> Result<Vec<TypeDescriptor>> {
        let mut items = vec![self.descriptor()?];
        loop {
            self.skip_ws();
            if self.src[self.pos..].starts_with(b"::") {
                self.pos += 2;
                items.push(self.descriptor()?);
            } else {
                return Ok(items);
            }
        }
    }

    fn descriptor(&mut self) -> Result<TypeDescriptor> {
        self.skip_ws();
        let name = self.ident()?;
        let kind = kind_from_name(&name);
        self.skip_ws();
        let mut args = Vec::new();
        if self.peek() == Some(b'[') {
            self.pos += 1;
            self.skip_ws();
            if self.peek() == Some(b']') {
                return Err(self.err("empty argument list"));
            }
            loop {
                args.push(self.arg()?);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b']') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected `,` or `]`")),
                }
            }
        }
        Ok(TypeDescriptor::new(kind, args))
    }

    fn arg(&mut self) -> Result<Arg> {
        self.skip_ws();
        match self.peek() {
            Some(b'"') => {
                self.pos += 1;
                let start = self.pos;
                while self.peek().map(|c| c != b'"').unwrap_or(false) {
                    self.pos += 1;
                }
                if self.peek() != Some(b'"') {
                    return Err(self.err("unterminated string"));
                }
                let s = std::str::from_utf8(&self.src[start..self.pos])
                    .map_err(|_| self.err("string is not UTF-8"))?
                    .to_owned();
                self.pos += 1;
                Ok(Arg::Str(s))
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.peek().map(|c| c.is_ascii_digit()).unwrap_or(false) {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let n: u64 = text.parse().map_err(|_| self.err("integer out of range"))?;
                Ok(Arg::Int(n))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                Ok(Arg::Chain(TypeChain::unchecked(self.chain()?)))
            }
            _ => Err(self.err("expected an argument")),
        }
    }

    fn ident(&mut self) -> Result<String> {
        let start = self.pos;
        while self
            .peek()
            .map(|c| c.is_ascii_alphanumeric() || c == b'_')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a type name"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_owned())
    }
}

fn kind_from_name(name: &str) -> Kind {
    match name {
        "Long" => Kind::Long,
        "Char" => Kind::Char,
        "Int" => Kind::Int,
        "Bool" => Kind::Bool,
        "array" => Kind::Array,
        "queue" => Kind::Queue,
        "referencerecord" => Kind::ReferenceRecord,
        "allocated" => Kind::Allocated,
        "partitioned" => Kind::Partitioned,
        "single" => Kind::Single,
        "multiple" => Kind::Multiple,
        "evendist" => Kind::Evendist,
        "const" => Kind::Const,
        "async" => Kind::Async,
        "allreduce" => Kind::Allreduce,
        other => Kind::Custom(other.to_owned()),
    }
}
