"""
Bandwidth Sentinel - Model Catalog Module
Convolution layer shapes and whole-network catalogs

This module provides:
- ConvLayerShape / NetworkModel value types with invariant checking
- Output spatial arithmetic for strided, padded convolutions
- The comma-separated catalog format (parse and serialize)
- Loading of the built-in catalogs shipped under catalogs/
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)

CATALOG_FIELDS = ("name", "wi", "hi", "k", "stride", "pad", "cin", "cout", "groups")

BUILTIN_NETWORKS = (
    "alexnet", "vgg16", "squeezenet", "googlenet",
    "resnet18", "resnet50", "mobilenetv2", "mnasnet",
)

# Alternate catalogs shipped next to the built-ins
CATALOG_VARIANTS = {
    "alexnet": ("alexnet", "alexnet224"),
}

DEFAULT_CATALOG_DIR = Path(__file__).parent.parent / "catalogs"

NETWORK_DIRECTIVE = "# network:"


class CatalogError(ValueError):
    """Raised for unknown catalogs and malformed networks"""


class LayerShapeError(ValueError):
    """Raised when a layer violates a shape invariant"""

    def __init__(self, layer_name: str, field: str, message: str):
        self.layer_name = layer_name
        self.field = field
        self.reason = message
        super().__init__(f"{layer_name}: {message}")


class CatalogParseError(CatalogError):
    """Parse failure pinned to a line and field of a catalog document"""

    def __init__(self, line_number: int, field: Optional[str], message: str):
        self.line_number = line_number
        self.field = field
        location = f"line {line_number}" + (f", field '{field}'" if field else "")
        super().__init__(f"{location}: {message}")


def _name_problem(name: str) -> Optional[str]:
    """Why a name cannot be written as a catalog field, or None"""
    if name.splitlines() != [name]:
        return "name must be a single non-empty line"
    if name != name.strip():
        return "name must not start or end with whitespace"
    if "," in name:
        return "name must not contain a comma"
    if name.startswith("#"):
        return "name must not start with '#'"
    return None


def _conv_extent(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


@dataclass(frozen=True)
class ConvLayerShape:
    """Geometry of one convolution layer (cin = M input maps, cout = N output maps)"""
    name: str
    wi: int
    hi: int
    k: int
    stride: int
    pad: int
    cin: int
    cout: int
    groups: int = 1

    def __post_init__(self):
        problem = _name_problem(self.name)
        if problem:
            raise LayerShapeError(repr(self.name), "name", problem)
        for field_name in ("wi", "hi", "k", "stride", "cin", "cout", "groups"):
            if getattr(self, field_name) < 1:
                raise LayerShapeError(self.name, field_name, f"{field_name} must be >= 1")
        if self.pad < 0:
            raise LayerShapeError(self.name, "pad", "pad must be >= 0")
        if self.cin % self.groups:
            raise LayerShapeError(self.name, "cin", "cin not divisible by groups")
        if self.cout % self.groups:
            raise LayerShapeError(self.name, "cout", "cout not divisible by groups")
        if _conv_extent(self.wi, self.k, self.stride, self.pad) < 1:
            raise LayerShapeError(self.name, "wi", "kernel larger than padded input width")
        if _conv_extent(self.hi, self.k, self.stride, self.pad) < 1:
            raise LayerShapeError(self.name, "hi", "kernel larger than padded input height")

    @property
    def wo(self) -> int:
        return _conv_extent(self.wi, self.k, self.stride, self.pad)

    @property
    def ho(self) -> int:
        return _conv_extent(self.hi, self.k, self.stride, self.pad)

    @property
    def cin_per_group(self) -> int:
        return self.cin // self.groups

    @property
    def cout_per_group(self) -> int:
        return self.cout // self.groups

    def to_record(self) -> str:
        return ",".join(str(getattr(self, f)) for f in CATALOG_FIELDS)


@dataclass(frozen=True)
class NetworkModel:
    """Ordered list of convolution layers of one network"""
    name: str
    layers: Tuple[ConvLayerShape, ...]

    def __post_init__(self):
        if self.name.splitlines() != [self.name] or self.name != self.name.strip():
            raise CatalogError(f"invalid network name {self.name!r}")
        if not self.layers:
            raise CatalogError("no layers")
        seen = set()
        for layer in self.layers:
            if layer.name in seen:
                raise CatalogError(f"{self.name}: duplicate layer name '{layer.name}'")
            seen.add(layer.name)

    def __len__(self) -> int:
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)


def output_dims(layer: ConvLayerShape) -> Tuple[int, int]:
    """
    Output spatial size of a layer

    Returns:
        (wo, ho) = floor((wi + 2*pad - k) / stride) + 1 per dimension
    """
    wo = _conv_extent(layer.wi, layer.k, layer.stride, layer.pad)
    ho = _conv_extent(layer.hi, layer.k, layer.stride, layer.pad)
    if wo < 1 or ho < 1:
        raise LayerShapeError(layer.name, "k", f"output dims ({wo}, {ho}) below 1")
    return wo, ho


def _parse_record(line_number: int, raw: str) -> ConvLayerShape:
    values = [v.strip() for v in raw.split(",")]
    if len(values) not in (len(CATALOG_FIELDS) - 1, len(CATALOG_FIELDS)):
        missing = CATALOG_FIELDS[len(values)] if len(values) < len(CATALOG_FIELDS) else None
        raise CatalogParseError(
            line_number, missing,
            f"expected {len(CATALOG_FIELDS) - 1} or {len(CATALOG_FIELDS)} fields, got {len(values)}"
        )
    if not values[0]:
        raise CatalogParseError(line_number, "name", "missing layer name")

    numbers: Dict[str, int] = {}
    for field_name, value in zip(CATALOG_FIELDS[1:], values[1:]):
        if not value:
            raise CatalogParseError(line_number, field_name, "missing value")
        try:
            numbers[field_name] = int(value)
        except ValueError:
            raise CatalogParseError(line_number, field_name, f"non-numeric value '{value}'")
    numbers.setdefault("groups", 1)

    try:
        return ConvLayerShape(name=values[0], **numbers)
    except LayerShapeError as e:
        raise CatalogParseError(line_number, e.field, e.reason)


def parse_network(text: str, name: Optional[str] = None) -> NetworkModel:
    """
    Parse a layer-catalog document

    Args:
        text: UTF-8 text, one `name,wi,hi,k,stride,pad,cin,cout[,groups]` record per line
        name: Name given to the resulting network; defaults to the document's
              `# network: <name>` line, then to "custom"

    Returns:
        NetworkModel with layers in document order
    """
    layers: List[ConvLayerShape] = []
    names = set()
    declared = None
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            if declared is None and stripped.startswith(NETWORK_DIRECTIVE):
                declared = stripped[len(NETWORK_DIRECTIVE):].strip()
            continue
        layer = _parse_record(line_number, stripped)
        if layer.name in names:
            raise CatalogParseError(line_number, "name", f"duplicate layer name '{layer.name}'")
        names.add(layer.name)
        layers.append(layer)

    if not layers:
        raise CatalogError("no layers")

    name = name or declared or "custom"
    logger.debug(f"Parsed {len(layers)} layers for network {name}")
    return NetworkModel(name=name, layers=tuple(layers))


def serialize_network(network: NetworkModel) -> str:
    """Render a network in the catalog format (always writes the groups field)"""
    lines = [f"{NETWORK_DIRECTIVE} {network.name}", "# " + ",".join(CATALOG_FIELDS)]
    lines.extend(layer.to_record() for layer in network.layers)
    return "\n".join(lines) + "\n"


def load_network_file(path: str, name: Optional[str] = None) -> NetworkModel:
    """Load a catalog file; the network is named after the file stem unless given"""
    catalog_path = Path(path)
    try:
        text = catalog_path.read_text(encoding="utf-8")
    except OSError as e:
        raise CatalogError(f"cannot read catalog {catalog_path}: {e}")
    network = parse_network(text, name or catalog_path.stem)
    logger.info(f"Loaded {len(network)} layers from {catalog_path}")
    return network


def builtin_catalog(name: str, catalog_dir: Optional[str] = None) -> NetworkModel:
    """
    Load one of the shipped catalogs

    Args:
        name: alexnet, vgg16, squeezenet, googlenet, resnet18, resnet50,
              mobilenetv2, mnasnet, or a shipped variant such as alexnet224
        catalog_dir: Directory holding the catalog files

    Returns:
        Convolution-only NetworkModel
    """
    directory = Path(catalog_dir) if catalog_dir else DEFAULT_CATALOG_DIR
    known = set(BUILTIN_NETWORKS)
    for variants in CATALOG_VARIANTS.values():
        known.update(variants)
    if name not in known:
        raise CatalogError(f"unknown network '{name}'")
    return load_network_file(str(directory / f"{name}.csv"), name)


def catalog_variants(name: str) -> Tuple[str, ...]:
    """All shipped catalogs describing the same network"""
    return CATALOG_VARIANTS.get(name, (name,))


def catalog_base_name(name: str) -> str:
    """Network a shipped variant catalog belongs to (alexnet224 -> alexnet)"""
    for base, variants in CATALOG_VARIANTS.items():
        if name in variants:
            return base
    return name


class CatalogManager:
    """
    Resolves network names and catalog files using the application config
    """

    def __init__(self, config: Dict):
        self.config = config
        catalogs = config.get('catalogs', {})
        self.catalog_dir = catalogs.get('directory', str(DEFAULT_CATALOG_DIR))
        if not Path(self.catalog_dir).is_absolute() and not Path(self.catalog_dir).exists():
            self.catalog_dir = str(DEFAULT_CATALOG_DIR)
        self.default_networks = list(catalogs.get('default_networks', BUILTIN_NETWORKS))
        self._cache: Dict[str, NetworkModel] = {}

        logger.info(f"Catalog manager initialized - directory: {self.catalog_dir}")

    def get(self, name: str) -> NetworkModel:
        if name not in self._cache:
            self._cache[name] = builtin_catalog(name, self.catalog_dir)
        return self._cache[name]

    def resolve(self, names: Optional[List[str]] = None,
                files: Optional[List[str]] = None) -> List[NetworkModel]:
        """Networks named on the command line followed by catalog files"""
        networks = [self.get(n) for n in (names or [])]
        networks.extend(load_network_file(f) for f in (files or []))
        return networks


def create_catalog_manager(config: Dict) -> CatalogManager:
    """Factory function to create the catalog manager"""
    return CatalogManager(config)
