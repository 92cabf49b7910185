"""Exception hierarchy shared across the package.

Every error raised by library code derives from AgweatherError so callers
can catch one base type; the CLI maps validation errors to exit code 1 and
runtime errors to exit code 2.
"""


class AgweatherError(Exception):
    """Base class for all package errors."""


# --- grid store ---

class BadMagic(AgweatherError):
    """File does not start with the AGWX magic bytes."""


class TruncatedPayload(AgweatherError):
    """Header declares more payload than the file contains."""


class InvalidHeader(AgweatherError):
    """Header fields are structurally invalid (dims, kind, date, version)."""


class OutOfDomain(AgweatherError):
    """Point lies outside the raster's bounding box."""


class IndexOutOfRange(AgweatherError):
    """Row/col index outside the grid."""


class DateOutOfRange(AgweatherError):
    """Date outside the stack's temporal coverage."""


# --- geo extraction ---

class EmptyEA(AgweatherError):
    """Enumeration area has no member points."""


class UnknownHousehold(AgweatherError):
    """Household id absent from the geo context."""


class MissingContext(AgweatherError):
    """Geo context lacks data required by the requested scheme."""


class EmptyZone(AgweatherError):
    """Polygon contains no raster cell center."""


# --- weather metrics ---

class RangeUnavailable(AgweatherError):
    """Season window falls outside the series' date range."""


class EmptySeason(AgweatherError):
    """Season slice holds no observations."""


class EmptySeries(AgweatherError):
    """Series holds no observations."""


class TooFewSeasons(AgweatherError):
    """Long-run statistics need at least two seasons."""


# --- survey model ---

class SchemaMismatch(AgweatherError):
    """CSV columns do not match the expected schema."""


class DuplicateKey(AgweatherError):
    """Duplicate (hh_id, year) or duplicate metric key."""


class NegativeOutcome(AgweatherError):
    """Outcome or rate column contains a negative value."""


class MissingMetric(AgweatherError):
    """Required weather metric absent for a household-year."""


class AmbiguousJoin(AgweatherError):
    """Metric selection resolves to more than one value per key."""


# --- econometrics ---

class MissingColumn(AgweatherError):
    """Design requires a column the panel does not carry."""


class AllMissingMetric(AgweatherError):
    """Every value of the requested metric is missing."""


class NoVariation(AgweatherError):
    """No household has two or more observations; FE cannot be absorbed."""


class RankDeficient(AgweatherError):
    """Design matrix is rank deficient; names the collinear columns."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"collinear columns: {self.columns}")


class TooFewClusters(AgweatherError):
    """Cluster-robust covariance needs at least two clusters."""


class DegenerateDof(AgweatherError):
    """Non-positive degrees of freedom for a test statistic."""


# --- battery ---

class EmptyDimension(AgweatherError):
    """A battery dimension (countries, metrics, ...) is empty."""


class EmptyGroup(AgweatherError):
    """Aggregation group holds no usable rows."""


class MissingReference(AgweatherError):
    """Reference metric absent from a comparison cell."""


class ProviderUnavailable(AgweatherError):
    """Battery data provider cannot serve any runs (fatal)."""


# --- config / cli ---

class ConfigError(AgweatherError):
    """Run configuration is missing or malformed; names the offending key."""
