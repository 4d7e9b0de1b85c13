from pydantic import BaseModel, ConfigDict

class BaseRecord(BaseModel):
    """Base schema for every record written to a trace or a report"""

    model_config = ConfigDict(from_attributes=True, arbitrary_types_allowed=True, use_enum_values=True)

    def to_line(self) -> str:
        """One line of line-delimited JSON"""

        return self.model_dump_json()
