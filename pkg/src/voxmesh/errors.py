"""Exception hierarchy shared by all voxmesh modules."""


class VoxmeshError(Exception):
    """Base class for every error raised by this package."""


class EmptyInput(VoxmeshError, ValueError):
    pass


class InsufficientPoints(VoxmeshError, ValueError):
    pass


class InvalidParam(VoxmeshError, ValueError):
    pass


class DegenerateInput(VoxmeshError, ValueError):
    pass


class TargetExceedsInput(VoxmeshError, ValueError):
    """Requested sample count is larger than the cloud; up-sample first."""


class QuotaExceedsPopulation(VoxmeshError, ValueError):
    pass


class MeshTopologyError(VoxmeshError):
    pass


class NonManifoldEdge(MeshTopologyError):
    def __init__(self, edge, n_faces=None):
        self.edge = tuple(int(v) for v in edge)
        self.n_faces = n_faces
        msg = f"edge {self.edge} is shared by {n_faces} faces"
        super().__init__(msg)


class NonManifoldVertex(MeshTopologyError):
    def __init__(self, vertex):
        self.vertex = int(vertex)
        super().__init__(f"vertex {self.vertex} joins several face fans")


class OrientationError(MeshTopologyError):
    pass


class NonManifoldInput(MeshTopologyError):
    pass


class EmptyMesh(VoxmeshError, ValueError):
    pass


class MeshingFailed(VoxmeshError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ProjectionUnstable(VoxmeshError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ParseError(VoxmeshError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IoError(VoxmeshError, OSError):
    pass
