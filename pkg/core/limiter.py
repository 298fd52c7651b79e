from slowapi import Limiter
from slowapi.util import get_remote_address

from core.config import API_RATE_LIMIT

# Shared by main.py and the routers so @limiter.limit sees app.state.limiter
limiter = Limiter(key_func=get_remote_address, default_limits=[API_RATE_LIMIT])
