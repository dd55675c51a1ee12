__all__ = ["CtxlangInput", "CtxlangRunnable"]

from pathlib import Path
from typing import (
    Any,
    Dict,
    List,
    Optional,
    Union,
)

from langchain_core.callbacks.manager import (
    BaseCallbackHandler,
    CallbackManager,
    Callbacks,
)
from langchain_core.globals import get_verbose
from langchain_core.runnables import Runnable
from langchain_core.runnables.config import (
    RunnableConfig,
    get_config_list,
)
from pydantic import (
    ConfigDict,
    PrivateAttr,
)

from .compiler import (
    Compiler,
    CtxlangConfig,
)
from .exceptions import (
    CtxCompileError,
    CtxFault,
    CtxFileNotFoundError,
    CtxValueError,
    PriorityCycleError,
)
from .runtime import RunResult


CtxlangInput = Union[str, Path, Dict[str, Any]]


class _DoNothing(BaseCallbackHandler):
    """A callback handler that does nothing, used when the runnable is nested in another component."""

    def on_chain_start(self, serialized: Dict[str, Any], inputs: Dict[str, Any], **kwargs: Any) -> None:
        pass

    def on_chain_end(self, outputs: Dict[str, Any], **kwargs: Any) -> None:
        pass

    def on_chain_error(self, error: BaseException, **kwargs: Any) -> None:
        pass


_KNOWN_ERRORS = (CtxCompileError, CtxFault, CtxFileNotFoundError, CtxValueError, PriorityCycleError)


class CtxlangRunnable(Runnable[CtxlangInput, RunResult]):
    """A runnable that compiles and runs ctxlang programs."""

    model_config = ConfigDict(arbitrary_types_allowed=True)
    _compiler: Compiler = PrivateAttr()

    def __init__(  # pylint: disable=too-many-arguments
        self,
        ctxlang_config: Optional[Union[CtxlangConfig, Dict]] = None,
        *,
        verbose: bool = False,
        callbacks: Optional[Callbacks] = None,
        tags: Optional[List[str]] = None,
        metadata: Optional[Dict[str, Any]] = None,
        name: Optional[str] = None,
        **kwargs: Any,
    ) -> None:
        """
        Initialize CtxlangRunnable with configuration.

        Args:
            ctxlang_config (CtxlangConfig | dict, optional): Configuration of compiler and runtime
            verbose (bool): Whether to enable verbose output. Defaults to False.
            callbacks (Callbacks, optional): Callback functions.
            tags (list[str], optional): Optional list of tags.
            metadata (dict, optional): Optional metadata dictionary.
            name (str, optional): The name of the Runnable. Used for debugging and tracing.
            **kwargs: Additional arguments passed to the Runnable class constructor

        Raises:
            CtxValueError: If the configuration is invalid
            CtxFileNotFoundError: If a search path or the vfs directory doesn't exist
        """
        self._compiler = Compiler(ctxlang_config)

        self.verbose = verbose or get_verbose()
        self.callbacks = callbacks
        self.tags = tags or []
        self.tags.append("ctxlang")
        self.metadata = metadata or {}
        self.metadata["ctxlang_config"] = self._compiler.config.model_dump(mode="json")
        self.name = name or self.__class__.__name__

        Runnable.__init__(self, **kwargs)

    @property
    def ctxlang_config(self) -> CtxlangConfig:
        """Get the compiler configuration."""
        return self._compiler.config

    @staticmethod
    def _process_input(input_data: CtxlangInput) -> Dict[str, Any]:
        """
        Normalise the input to a dict with ``source`` or ``path`` and an optional ``vfs``.

        Raises:
            CtxValueError: If the input type is invalid
        """
        if isinstance(input_data, Path):
            return {"path": input_data}
        if isinstance(input_data, str):
            if not input_data.strip():
                raise CtxValueError("ctxlang source cannot be empty")
            return {"source": input_data}
        if isinstance(input_data, dict):
            unknown = set(input_data) - {"source", "path", "vfs"}
            if unknown:
                raise CtxValueError(f"Unsupported input keys: {sorted(unknown)}")
            if ("source" in input_data) == ("path" in input_data):
                raise CtxValueError("Input needs exactly one of 'source' and 'path'")
            return input_data
        raise CtxValueError("Input must be source text, a path, or a dict with 'source' or 'path'")

    def invoke(self, input: CtxlangInput, config: Optional[RunnableConfig] = None, **kwargs: Any) -> RunResult:
        """
        Compile and run a program.

        Args:
            input (str | Path | dict): Program source, program file, or {"source"|"path", "vfs"}
            config (RunnableConfig, optional): Optional langchain runnable configuration

        Returns:
            RunResult: exit code, console output, fault report and the locals of main

        Raises:
            CtxValueError: If the input is invalid
            CtxCompileError: If the program does not compile
            CtxFault: If the pipeline fails unexpectedly
        """
        config = config or {}

        if self.__class__.__name__ == "CtxlangRunnable":
            callback_manager = CallbackManager.configure(
                inheritable_callbacks=config.get("callbacks"),
                local_callbacks=self.callbacks,
                verbose=config.get("verbose", self.verbose),  # type: ignore
                inheritable_tags=config.get("tags"),
                local_tags=self.tags,
                inheritable_metadata=config.get("metadata"),
                local_metadata=self.metadata,
            )
            run_manager = callback_manager.on_chain_start(
                {"name": config.get("run_name") or self.get_name()},
                {"input": str(input)},
                **kwargs,
            )
        else:
            run_manager = _DoNothing()  # type: ignore

        try:
            request = self._process_input(input)
            compilation = self._compiler.compile(source=request.get("source"), path=request.get("path"))
            vfs = self._compiler.make_vfs(request.get("vfs"))
            result = self._compiler.run(compilation, vfs)
            run_manager.on_chain_end({"output": result.model_dump(exclude={"locals"})})
            return result

        except _KNOWN_ERRORS as e:
            run_manager.on_chain_error(e)
            raise
        except Exception as e:
            run_manager.on_chain_error(e)
            raise CtxFault(f"ctxlang execution error: {str(e)}", log_level="error")

    async def ainvoke(
        self,
        input: CtxlangInput,
        config: Optional[RunnableConfig] = None,
        **kwargs: Any,
    ) -> RunResult:
        """
        Compile and run a program asynchronously.

        Args:
            input (str | Path | dict): Program source, program file, or {"source"|"path", "vfs"}
            config (RunnableConfig, optional): langchain runnable configuration

        Returns:
            RunResult: exit code, console output, fault report and the locals of main
        """
        return self.invoke(input, config=config, **kwargs)

    def batch(
        self,
        inputs: List[CtxlangInput],
        config: Optional[Union[RunnableConfig, List[RunnableConfig]]] = None,
        *,
        return_exceptions: bool = False,
        **kwargs: Optional[Any],
    ) -> List[RunResult]:
        """
        Compile and run several programs, one after the other.

        Args:
            inputs (list): Programs as accepted by ``invoke``
            config (RunnableConfig | list[RunnableConfig], optional): Optional langchain runnable configuration(s)
            return_exceptions (bool): If True, a failing program yields its exception instead of raising.
                                      Defaults to False.

        Returns:
            One RunResult (or exception) per input

        Raises:
            CtxValueError: If inputs is not a list
        """
        if not isinstance(inputs, list):
            raise CtxValueError("CtxlangRunnable batch inputs must be a list")

        configs = get_config_list(config, len(inputs))
        results: List[Any] = []

        for input_item, config_item in zip(inputs, configs):
            try:
                results.append(self.invoke(input_item, config=config_item, **kwargs))
            except Exception as e:
                if return_exceptions:
                    results.append(e)
                else:
                    raise

        return results

    async def abatch(
        self,
        inputs: List[CtxlangInput],
        config: Optional[Union[RunnableConfig, List[RunnableConfig]]] = None,
        *,
        return_exceptions: bool = False,
        **kwargs: Optional[Any],
    ) -> List[RunResult]:
        """Asynchronous ``batch``."""
        return self.batch(inputs, config=config, return_exceptions=return_exceptions, **kwargs)
