"""Violation reports returned by the non-raising validators."""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self):
        return f"{self.kind}: {self.message}"


@dataclass
class ValidationReport:
    """Ordered list of violations; an empty report means the subject is valid."""

    violations: list = field(default_factory=list)

    def add(self, kind, message):
        self.violations.append(Violation(kind, message))

    @property
    def ok(self):
        return not self.violations

    def kinds(self):
        return [v.kind for v in self.violations]

    def messages(self):
        return [v.message for v in self.violations]

    def __bool__(self):
        # truthy when there is something to report
        return bool(self.violations)

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def __str__(self):
        if not self.violations:
            return "valid"
        return "\n".join(str(v) for v in self.violations)

    def to_dict(self):
        return {"violations": [{"kind": v.kind, "message": v.message} for v in self.violations]}
