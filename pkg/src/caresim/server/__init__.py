from .app import create_app
from .session import Session, SessionDeps, SessionExpired, create_session, handle_message, tick

__all__ = ["Session", "SessionDeps", "SessionExpired", "create_session",
           "handle_message", "tick", "create_app"]
