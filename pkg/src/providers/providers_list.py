from .InteractionProvider import InteractionProvider
from .MovieLensProvider import MovieLensProvider

interaction_provider = InteractionProvider()
movielens_provider = MovieLensProvider()
