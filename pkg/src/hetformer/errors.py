"""Exception hierarchy shared across the package."""


class HetformerError(Exception):
    """Base class for all errors raised by this package."""


# --- graph loading / validation ---

class GraphFormatError(HetformerError):
    pass


class MalformedLine(GraphFormatError):
    def __init__(self, path, lineno, reason):
        super().__init__(f"{path}:{lineno}: {reason}")
        self.path = path
        self.lineno = lineno
        self.reason = reason


class UnknownNodeType(GraphFormatError):
    pass


class DanglingEdge(GraphFormatError):
    def __init__(self, node_id):
        super().__init__(f"edge endpoint {node_id} is not a declared node")
        self.node_id = node_id


class TypeMismatch(GraphFormatError):
    pass


class DuplicateNode(GraphFormatError):
    def __init__(self, node_id):
        super().__init__(f"node id {node_id} declared more than once")
        self.node_id = node_id


class DuplicateEdge(GraphFormatError):
    pass


class SelfLoopEdge(GraphFormatError):
    pass


class UnknownNode(HetformerError):
    def __init__(self, node_id):
        super().__init__(f"node {node_id} not in graph")
        self.node_id = node_id


# --- embedding store ---

class EmbeddingFormatError(HetformerError):
    pass


class BadMagic(EmbeddingFormatError):
    pass


class DimMismatch(EmbeddingFormatError):
    pass


class TruncatedFile(EmbeddingFormatError):
    pass


# --- random-walk sampler ---

class NotANewsNode(HetformerError):
    def __init__(self, node_id):
        super().__init__(f"node {node_id} is not a news node")
        self.node_id = node_id


class NoNeighbors(HetformerError):
    def __init__(self, node_id):
        super().__init__(f"node {node_id} has no neighbors")
        self.node_id = node_id


# --- tensor library ---

class TensorError(HetformerError):
    pass


class ShapeMismatch(TensorError):
    pass


class IndexOutOfRange(TensorError):
    pass


class NotScalar(TensorError):
    pass


class NonFiniteValue(TensorError):
    pass


class NonFiniteGradient(TensorError):
    pass


# --- model / training ---

class LengthOverflow(HetformerError):
    pass


class TooFewSamples(HetformerError):
    pass


class MissingLabel(HetformerError):
    def __init__(self, node_id):
        super().__init__(f"news node {node_id} has no label")
        self.node_id = node_id


class MissingSample(HetformerError):
    def __init__(self, node_id):
        super().__init__(f"no RWR sample cached for news node {node_id}")
        self.node_id = node_id
