from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Protocol, Tuple

import requests

from internal.domain.errors import RemoteServiceError


@dataclass
class Response:
    data: Any
    status: int

    @property
    def ok(self) -> bool:
        return 200 <= self.status < 300


class AuthStrategy(Protocol):

    def apply_headers(self, headers: Dict[str, Any]) -> None: ...


class NoAuth:

    def apply_headers(self, headers: Dict[str, Any]) -> None:
        pass


class HeaderApiKeyAuth:

    def __init__(self, api_key: str, header_name: str = "Authorization") -> None:
        self.api_key = api_key
        self.header_name = header_name

    def apply_headers(self, headers: Dict[str, Any]) -> None:
        headers[self.header_name] = self.api_key


@dataclass
class Context:

    auth: AuthStrategy
    make_url: Callable[[str, str], str]
    timeout: float = 120.0

    @staticmethod
    def make(auth: Optional[AuthStrategy] = None, timeout: float = 120.0) -> "Context":
        return Context(
            auth=auth or NoAuth(),
            make_url=lambda base, endpoint: f"{base.rstrip('/')}/{endpoint}",
            timeout=timeout,
        )


class API:

    def __init__(self, ctx: Context) -> None:
        self._ctx = ctx

    def request(
        self,
        method: str,
        url: Tuple[str, str],
        body: Optional[Any] = None,
        params: Optional[Dict[str, Any]] = None,
    ) -> Response:
        headers = {"User-Agent": "qam-search"}
        self._ctx.auth.apply_headers(headers)

        try:
            response = requests.request(
                method,
                url=self._ctx.make_url(*url),
                headers=headers,
                params=params,
                json=body,
                timeout=self._ctx.timeout,
            )
        except requests.RequestException as exc:
            raise RemoteServiceError(
                f"{method} {url[0]}/{url[1]} failed: {exc}"
            ) from exc

        try:
            data = response.json() if response.content else {}
        except ValueError:
            data = {"error": response.text}
        return Response(data=data, status=response.status_code)

    def call(
        self, method: str, url: Tuple[str, str], body: Optional[Any] = None
    ) -> Any:
        """Like `request`, but raises on non-2xx replies and returns the payload."""
        response = self.request(method, url, body=body)
        if not response.ok:
            raise RemoteServiceError(
                f"{method} {url[0]}/{url[1]} returned "
                f"{response.status}: {response.data}"
            )
        return response.data
