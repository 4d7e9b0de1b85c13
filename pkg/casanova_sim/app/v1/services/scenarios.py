import tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from casanova_sim.app.core.base.errors import ScenarioError
from casanova_sim.app.utils.types import ValidatorId
from casanova_sim.app.v1.models import Transaction
from casanova_sim.app.v1.schemas.scenario import ScenarioConfig


@dataclass(frozen=True)
class Injection:
    tx: Transaction
    recipients: tuple[ValidatorId, ...]
    at: int


def describe_validation_error(exc: ValidationError) -> str:
    """One line per failed field, naming the offending key path"""

    lines = []
    for error in exc.errors():
        key = ".".join(str(part) for part in error["loc"]) or "<scenario>"
        lines.append(f"{key}: {error['msg']}")
    return "; ".join(lines)


def parse_scenario(text: str, source: str = "<scenario>", overrides: Optional[dict] = None) -> ScenarioConfig:
    """Parses TOML scenario text into a validated ScenarioConfig

    `overrides` replace top-level keys of the file before validation.

    Raises:
        ScenarioError: on TOML syntax errors (with line and column) or on
        invalid values (naming the key)
        FaultBoundError: when N < 3f + 1 and strict bounds are on
    """

    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{source}: {exc}")

    try:
        return ScenarioConfig.model_validate({**data, **(overrides or {})})
    except ValidationError as exc:
        raise ScenarioError(f"{source}: {describe_validation_error(exc)}")


def load_scenario(path, overrides: Optional[dict] = None) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"Scenario file {path} does not exist")

    return parse_scenario(path.read_text(), source=str(path), overrides=overrides)


def build_injections(config: ScenarioConfig) -> list[Injection]:
    """Client transactions of a scenario with payload names resolved to hashes"""

    by_payload: dict[str, Transaction] = {}
    injections = []
    for entry in config.transactions:
        tx = Transaction(
            payload=entry.payload.encode(),
            conflict_index=entry.conflict_index,
            requested_parents=frozenset(by_payload[p].tx_hash for p in entry.requested_parents),
        )
        by_payload[entry.payload] = tx
        recipients = tuple(sorted(set(entry.recipients))) if entry.recipients is not None else tuple(range(config.n))
        injections.append(Injection(tx, recipients, entry.at))
    return injections
