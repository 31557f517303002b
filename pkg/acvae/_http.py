"""MNIST downloader with retry logic."""

import asyncio
import logging
import os
import time
from pathlib import Path
from typing import Any

import httpx

from .exceptions import ArtifactIOError, DownloadError
from .mnist import MNIST_FILES

__all__ = ["MnistDownloader", "AsyncMnistDownloader", "mnist_filenames"]

logger = logging.getLogger(__name__)


def mnist_filenames() -> list[str]:
    """Compressed file names of both splits, images before labels."""
    return [f"{stem}.gz" for stems in MNIST_FILES.values() for stem in stems]


def _check_response(response: httpx.Response, name: str) -> bytes:
    """Return the body of a successful response.

    Raises:
        DownloadError: On any HTTP error status (not retried)
    """
    if response.status_code >= 400:
        raise DownloadError(f"{name}: HTTP {response.status_code}")
    if not response.content:
        raise DownloadError(f"{name}: empty response body")
    return response.content


def _store(target: Path, content: bytes) -> Path:
    tmp = target.with_name(target.name + ".part")
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(content)
        os.replace(tmp, target)
    except OSError as e:
        raise ArtifactIOError(target, e) from e
    logger.info(f"Downloaded {target.name} ({len(content)} bytes)")
    return target


class MnistDownloader:
    """Synchronous MNIST fetcher with automatic retry."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        max_retries: int = 3,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        """Initialize downloader.

        Args:
            base_url: Mirror URL holding the *.gz IDX files
            timeout: Request timeout in seconds
            max_retries: Maximum attempts per file
            transport: Optional httpx transport (tests use MockTransport)
        """
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries
        self.transport = transport
        self._client: httpx.Client | None = None

    def __enter__(self) -> "MnistDownloader":
        self._get_client()
        return self

    def __exit__(self, *args: Any) -> None:
        self.close()

    def _get_client(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(
                base_url=self.base_url,
                timeout=self.timeout,
                follow_redirects=True,
                transport=self.transport,
            )
        return self._client

    def fetch(self, name: str) -> bytes:
        """Download one file, retrying transport failures with exponential backoff.

        Raises:
            DownloadError: When the server answers with an error or all attempts fail
        """
        client = self._get_client()
        last_error: Exception | None = None

        for attempt in range(self.max_retries):
            try:
                return _check_response(client.get(f"/{name}"), name)
            except httpx.TimeoutException as e:
                last_error = e
                logger.warning(f"{name}: attempt {attempt + 1}/{self.max_retries} timed out")
            except httpx.TransportError as e:
                last_error = e
                logger.warning(f"{name}: attempt {attempt + 1}/{self.max_retries} failed: {e}")

            if attempt < self.max_retries - 1:
                wait_time = 2**attempt
                logger.info(f"Retrying in {wait_time}s...")
                time.sleep(wait_time)

        raise DownloadError(f"{name}: failed after {self.max_retries} attempts", last_error)

    def download(self, data_dir: Path | str, *, overwrite: bool = False) -> list[Path]:
        """Fetch all four MNIST files into data_dir, skipping ones already present."""
        data_dir = Path(data_dir)
        written: list[Path] = []
        for name in mnist_filenames():
            target = data_dir / name
            if target.exists() and not overwrite:
                logger.info(f"{target} exists, skipping")
                written.append(target)
                continue
            written.append(_store(target, self.fetch(name)))
        return written

    def close(self) -> None:
        if self._client:
            self._client.close()
            self._client = None


class AsyncMnistDownloader:
    """Asynchronous MNIST fetcher; the four files download concurrently."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        max_retries: int = 3,
        transport: httpx.AsyncBaseTransport | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries
        self.transport = transport
        self._client: httpx.AsyncClient | None = None

    async def __aenter__(self) -> "AsyncMnistDownloader":
        self._get_client()
        return self

    async def __aexit__(self, *args: Any) -> None:
        await self.close()

    def _get_client(self) -> httpx.AsyncClient:
        if self._client is None:
            self._client = httpx.AsyncClient(
                base_url=self.base_url,
                timeout=self.timeout,
                follow_redirects=True,
                transport=self.transport,
            )
        return self._client

    async def fetch(self, name: str) -> bytes:
        """Async counterpart of MnistDownloader.fetch."""
        client = self._get_client()
        last_error: Exception | None = None

        for attempt in range(self.max_retries):
            try:
                return _check_response(await client.get(f"/{name}"), name)
            except httpx.TimeoutException as e:
                last_error = e
                logger.warning(f"{name}: attempt {attempt + 1}/{self.max_retries} timed out")
            except httpx.TransportError as e:
                last_error = e
                logger.warning(f"{name}: attempt {attempt + 1}/{self.max_retries} failed: {e}")

            if attempt < self.max_retries - 1:
                wait_time = 2**attempt
                logger.info(f"Retrying in {wait_time}s...")
                await asyncio.sleep(wait_time)

        raise DownloadError(f"{name}: failed after {self.max_retries} attempts", last_error)

    async def _download_one(self, target: Path, overwrite: bool) -> Path:
        if target.exists() and not overwrite:
            logger.info(f"{target} exists, skipping")
            return target
        return _store(target, await self.fetch(target.name))

    async def download(self, data_dir: Path | str, *, overwrite: bool = False) -> list[Path]:
        data_dir = Path(data_dir)
        return list(
            await asyncio.gather(
                *(self._download_one(data_dir / name, overwrite) for name in mnist_filenames())
            )
        )

    async def close(self) -> None:
        if self._client:
            await self._client.aclose()
            self._client = None
