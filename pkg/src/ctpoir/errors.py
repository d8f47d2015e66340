"""Exception types shared across the pipeline.

Two broad families: input/format errors (bad files, bad tags, malformed
payloads) and pipeline errors (contract violations between stages). The CLI
maps the former to exit code 2 and the latter to exit code 3.
"""


class InputFormatError(Exception):
    """A file or external input could not be understood."""


class PipelineError(Exception):
    """A stage contract was violated with well-formed inputs."""


# --- volume / file ingestion ---------------------------------------------

class MissingTag(InputFormatError):
    def __init__(self, tag, filename=None):
        self.tag = tag
        self.filename = filename
        where = f" in {filename}" if filename else ""
        super().__init__(f"required DICOM tag {tag} absent{where}")


class InconsistentSeries(InputFormatError):
    """Slices of one series disagree on dims, spacing, or z-step."""


class UnsupportedTransferSyntax(InputFormatError):
    def __init__(self, uid):
        self.uid = uid
        super().__init__(f"unsupported transfer syntax {uid!r} (only uncompressed little-endian)")


class HeaderMismatch(InputFormatError):
    """Header-declared geometry does not match the raw payload size."""


class ValueOutOfRange(InputFormatError):
    """A voxel value lies outside the range its format allows."""

    def __init__(self, voxel, value, allowed):
        self.voxel = voxel
        self.value = value
        super().__init__(f"voxel {voxel} has value {value!r}, allowed {allowed}")


# --- mask / geometry -------------------------------------------------------

class DimMismatch(PipelineError):
    def __init__(self, a, b):
        super().__init__(f"dimension mismatch: {a} vs {b}")


class OutOfRange(PipelineError):
    """Voxels outside the clipped HU window where clipped input is required."""


class EmptyIntersection(PipelineError):
    """A region does not intersect the requested slice."""


# --- pluggable stages ------------------------------------------------------

class SegmenterFailure(PipelineError):
    def __init__(self, center_index, cause):
        self.center_index = center_index
        super().__init__(f"segmenter failed on stack centered at slice {center_index}: {cause}")


class ScorerFailure(PipelineError):
    def __init__(self, region_id, cause):
        self.region_id = region_id
        super().__init__(f"scorer failed on region {region_id}: {cause}")


# --- metrics ---------------------------------------------------------------

class EmptyList(PipelineError):
    """An aggregate metric was asked for zero cases."""


class EmptyLung(PipelineError):
    """Infected proportion is undefined for a zero-volume lung mask."""


class ZeroVariance(PipelineError):
    """Correlation is undefined when one series is constant."""


class ZeroGroundTruth(PipelineError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"ground-truth value at index {index} is zero; percent error undefined")


class SingleClass(PipelineError):
    """ROC analysis needs at least one positive and one negative label."""


# --- phantom ---------------------------------------------------------------

class SpecViolation(PipelineError):
    """A phantom spec breaks its own geometric or statistical invariants."""
