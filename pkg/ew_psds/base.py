from abc import ABC, abstractmethod

from .schemas.core import ClipSet
from .schemas.energy import PowerSample
from .schemas.report import Report
from .schemas.scoring import MatchCounts, MatchCriteria
from .types.energy import PowerSourceKind


class BaseMatcher(ABC):
    @abstractmethod
    def match(
        self,
        predictions: ClipSet,
        gt: ClipSet,
        criteria: MatchCriteria,
    ) -> MatchCounts:
        pass


class BasePowerSource(ABC):
    kind: PowerSourceKind

    @abstractmethod
    def read_watts(self) -> float:
        """Instantaneous power draw of the measured device."""
        pass

    def replay(self) -> list[PowerSample] | None:
        """A recorded trace to use instead of live sampling, if the source has one."""
        return None


class BaseReportFormatter(ABC):
    @abstractmethod
    def format_report(
        self,
        report: Report,
        **kwargs,
    ) -> str:
        pass
