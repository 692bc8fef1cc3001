import uvicorn
from varcalc.main import app

if __name__ == "__main__":
    uvicorn.run(
        "varcalc.main:app",
        host="0.0.0.0",
        port=8000,
        reload=True
    )
