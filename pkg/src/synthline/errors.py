"""Exception types shared across the package.

Errors that callers are expected to branch on carry structured fields
(path, expected value, residuals) rather than only a message string.
"""

from __future__ import annotations


class SynthlineError(Exception):
    """Base class for all package errors."""


# --- config_dsl ---


class ConfigSyntaxError(SynthlineError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{loc}")


class SchemaError(SynthlineError):
    def __init__(self, path: str, expected: str, found: object):
        self.path = path
        self.expected = expected
        self.found = found
        super().__init__(f"{path}: expected {expected}, found {found!r}")


class UnresolvedReference(SynthlineError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"unresolved reference: ${{{path}}}")


class IncludeError(SynthlineError):
    pass


# --- asset registry ---


class DuplicateAsset(SynthlineError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate asset name: {name}")


class ManifestError(SynthlineError):
    def __init__(self, path: str, detail: str):
        self.path = path
        self.detail = detail
        super().__init__(f"{path}: {detail}")


class NoCandidates(SynthlineError):
    pass


class UnknownCategory(SynthlineError):
    def __init__(self, category: str):
        self.category = category
        super().__init__(f"unknown asset category: {category}")


class UnknownAsset(SynthlineError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"no registry asset matches: {key}")


# --- randomizer / kinematics ---


class DimensionMismatch(SynthlineError):
    pass


class IkNotConverged(SynthlineError):
    def __init__(self, position_residual: float, orientation_residual: float):
        self.position_residual = position_residual
        self.orientation_residual = orientation_residual
        super().__init__(
            f"IK did not converge: pos residual {position_residual:.3e} m, "
            f"ori residual {orientation_residual:.3e} rad"
        )


class Unreachable(SynthlineError):
    pass


# --- skill engine ---


class SkillError(SynthlineError):
    """Base for skill-expansion failures; compile annotates step/arm."""

    def __init__(self, message: str, step: int | None = None, arm: str | None = None):
        self.step = step
        self.arm = arm
        where = f" (step {step}, arm {arm})" if step is not None else ""
        super().__init__(f"{message}{where}")

    def at(self, step: int, arm: str) -> "SkillError":
        return type(self)(self.args[0].split(" (step ")[0], step=step, arm=arm)


class NoFeasibleGrasp(SkillError):
    pass


class NotHeld(SkillError):
    pass


class RatioOutOfRange(SkillError):
    pass


class JointLimitExceeded(SkillError):
    pass


class NoContactRegion(SkillError):
    pass


class UnknownFrame(SkillError):
    pass


class UnsupportedSkill(SynthlineError):
    def __init__(self, name: str, reason: str):
        self.skill = name
        super().__init__(f"skill '{name}' is not supported: {reason}")


# --- store / pipeline ---


class AlreadyExists(SynthlineError):
    pass


class NotFound(SynthlineError):
    pass


class CorruptEpisode(SynthlineError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"corrupt episode: {detail}")


class ConfigInvalid(SynthlineError):
    pass


class StoreUnwritable(SynthlineError):
    pass


class PipelineAborted(SynthlineError):
    """Raised when the supervisor declares the run unrecoverable."""

    def __init__(self, reason: str, report=None):
        self.reason = reason
        self.report = report
        super().__init__(f"pipeline aborted: {reason}")
