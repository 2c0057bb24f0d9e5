"""
YAML dataset manifests.

Floats are written with their shortest round-trip representation, so a
manifest read back is equal field by field to the one written, including
every LED's frequency and pixel offset.

Reading goes through the composed node tree instead of `yaml.safe_load`,
so that a missing key, an unknown key or a malformed value is reported
together with its line number.
"""
import logging
import yaml

from typing import Any, Dict, List, Optional, Tuple

from fpm_processing.src.exceptions import ManifestParseError
from fpm_processing.src.optics import IlluminationGeometry, LedOffset, MultiplexPlan
from fpm_processing.src.phantom import DatasetManifest, NoiseModel, PlanKind


logger = logging.getLogger(__name__)


MANIFEST_VERSION = 1

GEOMETRY_KEYS = {
    'led_pitch_mm': 'float',
    'led_distance_mm': 'float',
    'wavelength_um': 'float',
    'numerical_aperture': 'float',
    'magnification': 'float',
    'camera_pixel_um': 'float',
    'grid_half_extent': 'int',
}

OPTIONAL_GEOMETRY_KEYS = {
    'led_whitelist': 'pairs',
    'max_illumination_na': 'float',
}

REQUIRED_KEYS = {
    'geometry': 'mapping',
    'n1': 'int',
    'n2': 'int',
    'm1': 'int',
    'm2': 'int',
}

OPTIONAL_KEYS = {
    'version': 'int',
    'seed': 'int',
    'noise_model': 'str',
    'noise_sigma': 'float',
    'plan_kind': 'str',
    'group_size': 'int',
    'phase_range': 'float_pair',
    'plan': 'sequence',
}

LED_KEYS = {
    'led_index': 'int',
    'u': 'int',
    'v': 'int',
    'freq_cycles_per_um': 'float_pair',
    'pixel_offset': 'int_pair',
}


def manifest_to_dict(manifest: DatasetManifest) -> Dict[str, Any]:
    geom = manifest.geometry

    geometry = {name: getattr(geom, name) for name in GEOMETRY_KEYS}
    geometry['led_whitelist'] = (
        [list(pair) for pair in geom.led_whitelist] if geom.led_whitelist is not None else None
    )
    geometry['max_illumination_na'] = geom.max_illumination_na

    data = {
        'version': MANIFEST_VERSION,
        'geometry': geometry,
        'n1': manifest.n1,
        'n2': manifest.n2,
        'm1': manifest.m1,
        'm2': manifest.m2,
        'seed': manifest.seed,
        'noise_model': manifest.noise_model.value,
        'noise_sigma': float(manifest.noise_sigma),
        'plan_kind': manifest.plan_kind.value,
        'group_size': manifest.group_size,
        'phase_range': list(manifest.phase_range),
    }

    if manifest.plan is not None:
        data['plan'] = [
            [
                {
                    'led_index': led.led_index,
                    'u': led.u,
                    'v': led.v,
                    'freq_cycles_per_um': [float(x) for x in led.freq_cycles_per_um],
                    'pixel_offset': [int(x) for x in led.pixel_offset],
                }
                for led in leds
            ]
            for leds in manifest.plan.sets
        ]

    return data


def dump_manifest(manifest: DatasetManifest) -> str:
    return yaml.safe_dump(manifest_to_dict(manifest), sort_keys=False, default_flow_style=None)


def write_manifest(path: str, manifest: DatasetManifest) -> None:
    with open(path, 'w') as handle:
        handle.write(dump_manifest(manifest))


class _NodeReader:
    """
    Turns composed YAML nodes into typed values, raising ManifestParseError
    with the key and line of the offending node.
    """

    def __init__(self) -> None:
        self._constructor = yaml.constructor.SafeConstructor()

    @staticmethod
    def _line(node: yaml.Node) -> int:
        return node.start_mark.line + 1

    def _fail(self, message: str, key: str, node: yaml.Node) -> None:
        raise ManifestParseError(f'{key}: {message}', key=key, line=self._line(node))

    def _scalar(self, node: yaml.Node, key: str) -> Any:
        if not isinstance(node, yaml.ScalarNode):
            self._fail('expected a single value', key, node)

        try:
            return self._constructor.construct_object(node, deep=True)
        except (yaml.YAMLError, ValueError) as error:
            problem = getattr(error, 'problem', None) or str(error)
            self._fail(f'unreadable value ({problem})', key, node)

    def mapping(self, node: yaml.Node, key: str, required: Dict[str, str], optional: Dict[str, str]) -> Dict[str, Any]:
        if not isinstance(node, yaml.MappingNode):
            self._fail('expected a mapping', key, node)

        values = {}

        for key_node, value_node in node.value:
            name = self._scalar(key_node, key)

            if name not in required and name not in optional:
                self._fail(f'unknown key {name!r}', name, key_node)

            if name in values:
                self._fail('duplicate key', name, key_node)

            values[name] = self.value(value_node, name, {**required, **optional}[name])

        for name in required:
            if name not in values:
                raise ManifestParseError(
                    f'missing required key {name!r}',
                    key=name,
                    line=self._line(node),
                )

        return values

    def value(self, node: yaml.Node, key: str, kind: str) -> Any:
        if kind in ('mapping', 'sequence'):
            # Parsed later by the caller, which knows the nested schema
            return node

        if kind in ('float_pair', 'int_pair'):
            return self._pair(node, key, kind[:-5])

        if kind == 'pairs':
            if isinstance(node, yaml.ScalarNode) and self._scalar(node, key) is None:
                return None

            return tuple(self._pair(item, key, 'int') for item in self._items(node, key))

        value = self._scalar(node, key)

        if kind == 'float' and key in OPTIONAL_GEOMETRY_KEYS and value is None:
            return None

        if kind == 'int':
            if isinstance(value, bool) or not isinstance(value, int):
                self._fail(f'expected an integer, got {value!r}', key, node)

            return value

        if kind == 'float':
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self._fail(f'malformed number {value!r}', key, node)

            return float(value)

        if not isinstance(value, str):
            self._fail(f'expected a string, got {value!r}', key, node)

        return value

    def _items(self, node: yaml.Node, key: str) -> List[yaml.Node]:
        if not isinstance(node, yaml.SequenceNode):
            self._fail('expected a list', key, node)

        return node.value

    def _pair(self, node: yaml.Node, key: str, kind: str) -> Tuple:
        items = self._items(node, key)

        if len(items) != 2:
            self._fail(f'expected two values, got {len(items)}', key, node)

        return tuple(self.value(item, key, kind) for item in items)

    def plan(self, node: yaml.Node) -> MultiplexPlan:
        sets = []

        for set_node in self._items(node, 'plan'):
            leds = []

            for led_node in self._items(set_node, 'plan'):
                fields = self.mapping(led_node, 'plan', LED_KEYS, {})
                leds.append(LedOffset(**fields))

            sets.append(tuple(leds))

        return MultiplexPlan(sets=tuple(sets))


def parse_manifest(text: str, source: str = '<manifest>') -> DatasetManifest:
    """
    Parses manifest text. When a plan is present it is validated against
    the grids, so out-of-grid offsets surface as a ValidationError.
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
        raise ManifestParseError(f'{source}: {exc.problem}', line=line) from exc

    if root is None:
        raise ManifestParseError(f'{source}: empty manifest')

    reader = _NodeReader()
    values = reader.mapping(root, 'manifest', REQUIRED_KEYS, OPTIONAL_KEYS)

    version = values.pop('version', MANIFEST_VERSION)

    if version != MANIFEST_VERSION:
        raise ManifestParseError(f'{source}: unsupported manifest version {version}', key='version')

    geometry_values = reader.mapping(values.pop('geometry'), 'geometry', GEOMETRY_KEYS, OPTIONAL_GEOMETRY_KEYS)
    plan_node: Optional[yaml.Node] = values.pop('plan', None)

    if isinstance(plan_node, yaml.ScalarNode) and plan_node.tag == 'tag:yaml.org,2002:null':
        plan_node = None

    for name, kind in (('noise_model', NoiseModel), ('plan_kind', PlanKind)):
        if name in values:
            try:
                values[name] = kind(values[name])
            except ValueError:
                raise ManifestParseError(
                    f'{name}: unknown value {values[name]!r}', key=name
                ) from None

    manifest = DatasetManifest(
        geometry=IlluminationGeometry(**geometry_values),
        plan=reader.plan(plan_node) if plan_node is not None else None,
        **values
    )

    if manifest.plan is not None:
        manifest.validate()

    return manifest


def read_manifest(path: str) -> DatasetManifest:
    with open(path) as handle:
        text = handle.read()

    logger.info(f"Loading manifest {path}...")

    return parse_manifest(text, source=path)
