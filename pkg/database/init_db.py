from database.database import Base, engine
from database.models import RunRecord, ArtifactRecord  # noqa: F401  registers the tables


def create_tables(bind=None):
    """Create the run ledger tables"""
    Base.metadata.create_all(bind=bind or engine)


if __name__ == "__main__":
    create_tables()
    print("Run ledger tables created successfully!")
