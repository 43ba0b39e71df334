"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class UndefinedSimilarityError(ValueError):
    """OKS requested against a reference with no labeled keypoints."""


class SchemaError(ValueError):
    """A file does not follow its expected schema."""


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names which one."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
