import json
from typing import Optional

def success_response(exit_code: int = 0, message: str = "", data: Optional[dict] = None) -> int:
    """Prints a command's result as one JSON document on stdout

    Args:
        - exit_code (int): The exit status to be returned
        - message (str): Summary of the outcome
        - data (Optional[dict], optional): Report to be printed if available. Defaults to None.

    Returns:
        int: the exit status, for the caller to hand back to the shell
    """

    response_data = {
        "exit_code": exit_code,
        "success": exit_code == 0,
        "message": message,
    }

    if data:
        response_data['data'] = data

    print(json.dumps(response_data, indent=4, sort_keys=True))
    return exit_code
