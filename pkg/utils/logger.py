import json
from datetime import datetime
from pathlib import Path
from typing import List, Dict, Any, Optional
import uuid


class RunLogger:
    def __init__(self, log_dir: str = "logs", log_prefix: str = ""):
        """
        Initialize the run logger.

        Args:
            log_dir (str): Directory to store log files
            log_prefix (str): Prefix for log files
        """
        self.log_dir = Path(log_dir)
        self.log_prefix = log_prefix
        self.log_dir.mkdir(parents=True, exist_ok=True)

    def _get_log_file(self):
        """Get the current log file path with prefix"""
        timestamp = datetime.now().strftime("%Y%m%d")
        return self.log_dir / f"{self.log_prefix}run_logs_{timestamp}.jsonl"

    def log_run(self,
                command: str,
                parameters: Dict[str, Any],
                inputs: Optional[Dict[str, Any]] = None,
                records: Optional[int] = None,
                outputs: Optional[List[str]] = None,
                elapsed: Optional[float] = None,
                run_id: Optional[str] = None,
                extra: Optional[Dict[str, Any]] = None) -> str:
        """
        Append one executed command to the day's JSONL log.

        Args:
            command (str): Command or operation name
            parameters (Dict[str, Any]): Effective parameters of the run
            inputs (Dict[str, Any], optional): Input files and their record counts
            records (int, optional): Number of ledger records replayed
            outputs (List[str], optional): Files written by the run
            elapsed (float, optional): Wall time in seconds
            run_id (str, optional): Identifier for the run, generated when absent
            extra (Dict[str, Any], optional): Command specific details

        Returns:
            str: The run id
        """
        run_id = run_id or str(uuid.uuid4())
        log_entry = {
            "command": command,
            "parameters": parameters,
            "inputs": inputs or {},
            "records": records,
            "outputs": outputs or [],
            "elapsed_seconds": elapsed,
            "timestamp": datetime.now().isoformat(),
            "run_id": run_id,
            "extra": extra or {},
        }

        log_file = self._get_log_file()
        with open(log_file, 'a', encoding='utf-8') as f:
            f.write(json.dumps(log_entry, default=str) + '\n')
        return run_id

    def get_recent_logs(self, n: int = 10) -> List[Dict[str, Any]]:
        """
        Get the n most recent log entries.

        Args:
            n (int): Number of recent entries to retrieve

        Returns:
            List[Dict[str, Any]]: List of recent log entries
        """
        if not self._get_log_file().exists():
            return []

        logs = []
        with open(self._get_log_file(), 'r', encoding='utf-8') as f:
            for line in f:
                if line.strip():
                    logs.append(json.loads(line))

        return logs[-n:]

    def get_all_logs(self) -> List[Dict[str, Any]]:
        """Every entry from all run log files with this prefix, oldest file first."""
        logs = []
        for log_file in sorted(self.log_dir.glob(f"{self.log_prefix}run_logs_*.jsonl")):
            with open(log_file, 'r', encoding='utf-8') as f:
                for line in f:
                    if line.strip():
                        logs.append(json.loads(line))
        return logs
