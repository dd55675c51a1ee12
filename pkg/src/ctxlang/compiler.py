"""Compilation pipeline: read, link, check, lower, run."""

__all__ = ["CtxlangConfig", "Compilation", "Compiler"]

from dataclasses import dataclass
from pathlib import Path
from typing import (
    Dict,
    List,
    Optional,
    Union,
)

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
)

from .checker import (
    CheckedProgram,
    check_program,
)
from .exceptions import (
    CtxFileNotFoundError,
    CtxValueError,
)
from .loader import (
    LinkedProgram,
    read_file,
    read_program,
    resolve_imports,
)
from .logger import logger
from .lowering import (
    LoweredProgram,
    dump_program,
    lower_program,
)
from .parser import ParseStats
from .runtime import (
    RunResult,
    VirtualFS,
    run_program,
)
from .syntax import Program


class CtxlangConfig(BaseModel):
    """Configuration of the ctxlang compiler and runtime."""

    model_config = ConfigDict(
        arbitrary_types_allowed=True,
    )
    search_paths: List[Path] = Field(
        default_factory=list, description="Directories searched for <Name>.ctx when a class is referenced"
    )
    vfs: Dict[str, List[str]] = Field(default_factory=dict, description="In-memory files: path to lines")
    vfs_dir: Optional[Path] = Field(default=None, description="Directory mapped read-only into the virtual filesystem")
    trace_parse: bool = Field(default=False, description="Log every memo evaluation of the parser at TRACE level")
    collect_stats: bool = Field(default=False, description="Keep the parse statistics of the main unit")

    @field_validator("search_paths", mode="before")
    def validate_search_paths(cls, v: Optional[List[Union[str, Path]]]) -> List[Path]:
        if v is None:
            return []
        if isinstance(v, (str, Path)):
            v = [v]
        paths = [Path(p) for p in v]
        for path in paths:
            if not path.is_dir():
                raise CtxFileNotFoundError(f"search path not found: {path}")
        return paths

    @field_validator("vfs_dir", mode="before")
    def validate_vfs_dir(cls, v: Optional[Union[str, Path]]) -> Optional[Path]:
        if v is None:
            return None
        path = Path(v)
        if not path.is_dir():
            raise CtxFileNotFoundError(f"vfs directory not found: {path}")
        return path

    @field_validator("vfs", mode="before")
    def validate_vfs(cls, v: Optional[Dict[str, List[str]]]) -> Dict[str, List[str]]:
        if v is None:
            return {}
        if not isinstance(v, dict):
            raise CtxValueError("vfs must map paths to lists of lines")
        for path, lines in v.items():
            if not isinstance(path, str) or not path:
                raise CtxValueError(f"invalid vfs path: {path!r}")
            if isinstance(lines, str) or not all(isinstance(line, str) for line in lines):
                raise CtxValueError(f"vfs entry {path} must be a list of lines")
        return {path: list(lines) for path, lines in v.items()}


@dataclass
class Compilation:
    """Everything the pipeline produced for one program."""

    checked: CheckedProgram
    lowered: LoweredProgram

    @property
    def linked(self) -> LinkedProgram:
        return self.checked.linked

    @property
    def stats(self) -> Optional[ParseStats]:
        return self.checked.stats

    def dump_core(self) -> str:
        return dump_program(self.lowered)


class Compiler:
    """Runs the pipeline under one configuration.

    Args:
        config: compiler configuration, or a dict of its fields
    """

    def __init__(self, config: Optional[Union[CtxlangConfig, Dict]] = None) -> None:
        if isinstance(config, dict):
            config = CtxlangConfig(**config)
        elif config is None:
            config = CtxlangConfig()
        self.config = config.model_copy()

    def read(self, source: Optional[str] = None, path: Optional[Union[str, Path]] = None) -> Program:
        """Read a program from source text or from a file.

        Raises:
            CtxValueError: if neither or both are given
            CtxFileNotFoundError: if the file does not exist
            CtxSyntaxError: if the declarations do not read
        """
        if (source is None) == (path is None):
            raise CtxValueError("give either source text or a path")
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise CtxFileNotFoundError(f"source file not found: {path}")
            program = read_file(path)
        else:
            program = read_program(source)  # type: ignore[arg-type]
        logger.debug(f"loaded {program.origin}: {len(program.classes)} classes")
        return program

    def link(self, program: Program) -> LinkedProgram:
        linked = resolve_imports(program, self.config.search_paths)
        logger.debug(f"linked {program.origin}: {len(linked.classes)} classes, imports {linked.imports}")
        return linked

    def check(self, linked: LinkedProgram) -> CheckedProgram:
        checked = check_program(linked, trace=self.config.trace_parse)
        if not self.config.collect_stats:
            checked.stats = None
        logger.debug(f"checked {linked.program.origin}")
        return checked

    def compile(self, source: Optional[str] = None, path: Optional[Union[str, Path]] = None) -> Compilation:
        """Read, link, check and lower a program.

        Raises:
            CtxCompileError: with the diagnostics of the first failing phase
            PriorityCycleError: if the merged priorities are cyclic
        """
        checked = self.check(self.link(self.read(source, path)))
        lowered = lower_program(checked)
        logger.debug(f"lowered {lowered.origin}")
        return Compilation(checked, lowered)

    def make_vfs(self, extra: Optional[Dict[str, List[str]]] = None) -> VirtualFS:
        files: Dict[str, List[str]] = {}
        if self.config.vfs_dir is not None:
            files.update(VirtualFS.from_dir(self.config.vfs_dir).files)  # type: ignore[arg-type]
        files.update(self.config.vfs)
        files.update(extra or {})
        return VirtualFS(files)

    def run(self, compilation: Compilation, vfs: Optional[VirtualFS] = None) -> RunResult:
        return run_program(compilation.lowered, vfs if vfs is not None else self.make_vfs())
