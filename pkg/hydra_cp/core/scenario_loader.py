"""
Hydra-CP - Scenario Loader

Reads a YAML scenario file, applies command-line overrides and validates the
result against ExperimentConfig. The YAML node tree is composed alongside the
plain data so that every validation error can point at the line it came from.

Precedence: built-in default < file value < --set KEY=VALUE.
"""

from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import yaml
from loguru import logger
from pydantic import ValidationError

from hydra_cp.core.exceptions import ConfigValidationError, ScenarioError
from hydra_cp.models.config import ExperimentConfig, default_lineup

MANIFEST_SECTION = "manifest"
AGENT_COUNT_KEY = "scenario.agent_count"


@dataclass
class LoadedScenario:
    """A validated experiment plus where it came from."""

    config: ExperimentConfig
    source: str
    overrides: Tuple[str, ...] = ()
    method: Optional[str] = None
    line_map: Dict[str, int] = field(default_factory=dict)


# =============================================================================
# Parsing
# =============================================================================


def _line_map(node: yaml.Node, prefix: str = "") -> Dict[str, int]:
    """Dotted key -> 1-based source line for every key in a composed tree."""
    lines: Dict[str, int] = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key = f"{prefix}{key_node.value}"
            lines[key] = key_node.start_mark.line + 1
            lines.update(_line_map(value_node, f"{key}."))
    elif isinstance(node, yaml.SequenceNode):
        for index, item in enumerate(node.value):
            key = f"{prefix}{index}"
            lines[key] = item.start_mark.line + 1
            lines.update(_line_map(item, f"{key}."))
    return lines


def read_scenario_file(path: Path) -> Tuple[Dict[str, Any], Dict[str, int]]:
    """Parse a scenario file into (data, line map)."""
    if not path.is_file():
        raise ScenarioError(
            f"Scenario file not found: {path}", details={"path": str(path)}
        )

    text = path.read_text(encoding="utf-8")
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ScenarioError(f"{where}: invalid YAML: {e}", details={"path": str(path)})

    if data is None:
        return {}, {}
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}:1: top level must be a mapping")
    return data, _line_map(node) if node is not None else {}


def parse_override(text: str) -> Tuple[str, Any]:
    """Split KEY=VALUE; the value follows YAML scalar rules."""
    key, sep, raw = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigValidationError(f"--set {text}: expected KEY=VALUE")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as e:
        raise ConfigValidationError(f"--set {key}: value is not valid YAML: {e}")
    return key, value


def set_dotted(tree: Dict[str, Any], key: str, value: Any) -> None:
    """Assign into a nested dict/list by dotted path, creating mappings as needed."""
    parts = key.split(".")
    node: Any = tree
    for depth, part in enumerate(parts[:-1]):
        if isinstance(node, list):
            node = node[_list_index(node, part, parts[: depth + 1])]
            continue
        if not isinstance(node.get(part), (dict, list)):
            node[part] = {}
        node = node[part]
    last = parts[-1]
    if isinstance(node, list):
        node[_list_index(node, last, parts)] = value
    else:
        node[last] = value


def _list_index(node: List[Any], part: str, path: Sequence[str]) -> int:
    if not part.isdigit() or int(part) >= len(node):
        raise ConfigValidationError(f"--set {'.'.join(path)}: no such list element")
    return int(part)


# =============================================================================
# Agent count
# =============================================================================


def resize_agents(
    agent_specs: List[Dict[str, Any]], count: Any
) -> List[Dict[str, Any]]:
    """
    Return a lineup of `count` agents in total: the ego plus auxiliaries
    cycled from the declared ones. Cycled copies get fresh ids and sampled poses.
    """
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ConfigValidationError(
            f"{AGENT_COUNT_KEY}: must be an integer >= 1, got {count!r}"
        )

    egos = [a for a in agent_specs if str(a.get("kind")) == "ego"]
    auxiliaries = [a for a in agent_specs if str(a.get("kind")) != "ego"]
    if not egos:
        raise ConfigValidationError(f"{AGENT_COUNT_KEY}: lineup has no ego agent")
    if count > 1 and not auxiliaries:
        raise ConfigValidationError(
            f"{AGENT_COUNT_KEY}: no auxiliary agents to replicate"
        )

    resized = [egos[0]]
    for index, template in zip(range(count - 1), itertools.cycle(auxiliaries)):
        if index < len(auxiliaries):
            resized.append(template)
        else:
            clone = dict(template)
            clone["agent_id"] = f"{template['agent_id']}_{index // len(auxiliaries)}"
            clone["pose"] = None
            resized.append(clone)
    return resized


def _apply_agent_count(tree: Dict[str, Any]) -> None:
    scenario = tree.get("scenario")
    if not isinstance(scenario, dict) or "agent_count" not in scenario:
        return
    count = scenario.pop("agent_count")
    specs = scenario.get("agent_specs")
    if specs is None:
        specs = [spec.model_dump(mode="json") for spec in default_lineup()]
    scenario["agent_specs"] = resize_agents(list(specs), count)


# =============================================================================
# Validation
# =============================================================================


def _format_errors(
    error: ValidationError,
    source: str,
    line_map: Dict[str, int],
    override_keys: Iterable[str],
) -> str:
    overridden = set(override_keys)
    messages = []
    for item in error.errors():
        # Discriminated unions add the tag name to the location
        loc = [str(p) for p in item["loc"] if p not in ("faithful", "degraded")]
        key = ".".join(loc) or "<root>"
        origin = _locate(key, source, line_map, overridden)
        messages.append(f"{origin}: {key}: {item['msg']}")
    return "\n".join(messages)


def _locate(
    key: str, source: str, line_map: Dict[str, int], overridden: set[str]
) -> str:
    parts = key.split(".")
    for depth in range(len(parts), 0, -1):
        prefix = ".".join(parts[:depth])
        if prefix in overridden:
            return "--set"
        if prefix in line_map:
            return f"{source}:{line_map[prefix]}"
    return f"{source}:1"


def load_scenario(
    path: Optional[Path],
    overrides: Sequence[str] = (),
    seed: Optional[int] = None,
) -> LoadedScenario:
    """
    Load, override and validate a scenario.

    Args:
        path: Scenario YAML file; None means built-in defaults only
        overrides: KEY=VALUE strings applied in order
        seed: Optional replacement for scenario.seed

    Raises:
        ScenarioError: file missing or unparseable
        ConfigValidationError: any value out of range or unknown key
    """
    if path is not None:
        data, line_map = read_scenario_file(Path(path))
        source = str(path)
    else:
        data, line_map, source = {}, {}, "<defaults>"

    tree = copy.deepcopy(data)
    manifest = tree.pop(MANIFEST_SECTION, None) or {}
    if not isinstance(manifest, dict):
        line = line_map.get(MANIFEST_SECTION, 1)
        raise ConfigValidationError(f"{source}:{line}: manifest must be a mapping")

    applied: List[str] = []
    for text in overrides:
        key, value = parse_override(text)
        set_dotted(tree, key, value)
        applied.append(key)
    if seed is not None:
        set_dotted(tree, "scenario.seed", seed)
        applied.append("scenario.seed")

    _apply_agent_count(tree)

    try:
        config = ExperimentConfig.model_validate(tree)
    except ValidationError as e:
        raise ConfigValidationError(
            _format_errors(e, source, line_map, applied),
            details={"source": source, "errors": e.error_count()},
        )

    logger.debug(f"📋 Loaded scenario '{config.scenario.name}' from {source}")
    return LoadedScenario(
        config=config,
        source=source,
        overrides=tuple(overrides),
        method=manifest.get("method"),
        line_map=line_map,
    )


def manifest_echo(
    loaded: LoadedScenario,
    method: Optional[str],
    extra: Optional[Dict[str, Any]] = None,
) -> str:
    """
    Fully resolved scenario as YAML. Feeding the text back to `run` replays
    the same experiment without needing the original file or overrides.
    """
    document: Dict[str, Any] = loaded.config.model_dump(mode="json")
    section: Dict[str, Any] = {
        "source": loaded.source,
        "overrides": list(loaded.overrides),
        **(extra or {}),
    }
    if method is not None:
        section["method"] = method
    document[MANIFEST_SECTION] = section
    return yaml.safe_dump(document, sort_keys=True, default_flow_style=False)
